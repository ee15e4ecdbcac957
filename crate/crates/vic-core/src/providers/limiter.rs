//! Per-provider throttling: a concurrency cap plus minimum spacing between
//! dispatches. Both are enforced process-wide for a given provider id.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

pub struct RateLimiter {
    max_concurrent: usize,
    min_interval: Duration,
    state: Mutex<LimiterState>,
    freed: Condvar,
}

struct LimiterState {
    in_flight: usize,
    last_dispatch: Option<Instant>,
}

pub struct Permit<'a> {
    limiter: &'a RateLimiter,
}

impl RateLimiter {
    pub fn new(max_concurrent: usize, min_interval_ms: u64) -> Self {
        assert!(max_concurrent >= 1, "max_concurrent must be >= 1");
        RateLimiter {
            max_concurrent,
            min_interval: Duration::from_millis(min_interval_ms),
            state: Mutex::new(LimiterState {
                in_flight: 0,
                last_dispatch: None,
            }),
            freed: Condvar::new(),
        }
    }

    /// Block until an in-flight slot is free; the permit releases on drop.
    pub fn acquire(&self) -> Permit<'_> {
        let mut state = self.state.lock().unwrap();
        while state.in_flight >= self.max_concurrent {
            state = self.freed.wait(state).unwrap();
        }
        state.in_flight += 1;
        Permit { limiter: self }
    }

    /// Block until at least `min_interval` has passed since the previous
    /// dispatch, then claim the current instant as the new dispatch time.
    pub fn pace(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                match state.last_dispatch {
                    Some(last) => {
                        let elapsed = last.elapsed();
                        if elapsed >= self.min_interval {
                            state.last_dispatch = Some(Instant::now());
                            return;
                        }
                        self.min_interval - elapsed
                    }
                    None => {
                        state.last_dispatch = Some(Instant::now());
                        return;
                    }
                }
            };
            std::thread::sleep(wait);
        }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut state = self.limiter.state.lock().unwrap();
        state.in_flight -= 1;
        drop(state);
        self.limiter.freed.notify_one();
    }
}
