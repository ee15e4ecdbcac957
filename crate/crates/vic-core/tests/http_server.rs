//! End-to-end provider tests against a local TCP server speaking just
//! enough HTTP: header shapes, retry-on-429, and timeout classification.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use vic_core::model::Sampling;
use vic_core::providers::{
    Backend, GeminiCompatible, MessagePart, ModelRequest, OpenAiCompatible, ProviderConfig,
    ProviderKind, ProviderPool, RetryConfig, RetryOn,
};

/// One captured HTTP exchange.
struct Exchange {
    request: String,
}

/// Serve `responses` (status, body) pairs to consecutive connections,
/// returning each raw request. `hold_open` keeps the last connection
/// unanswered to provoke a client timeout.
fn serve(
    responses: Vec<(u16, String)>,
    hold_open: bool,
) -> (String, mpsc::Receiver<Exchange>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    let handle = thread::spawn(move || {
        let total = responses.len() + usize::from(hold_open);
        for i in 0..total {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 {
                    break;
                }
                if let Some(rest) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = rest.trim().parse().unwrap_or(0);
                }
                let done = line == "\r\n";
                request.push_str(&line);
                if done {
                    break;
                }
            }
            let mut body = vec![0u8; content_length];
            reader.read_exact(&mut body).unwrap();
            request.push_str(&String::from_utf8_lossy(&body));
            tx.send(Exchange { request }).unwrap();
            if let Some((status, body)) = responses.get(i) {
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\n\
                     Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            } else {
                // hold the connection open past the client timeout
                thread::sleep(Duration::from_millis(900));
            }
        }
    });
    (base, rx, handle)
}

fn openai_ok(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"content": text}, "finish_reason": "stop"}]
    })
    .to_string()
}

fn request(provider: &str) -> ModelRequest {
    ModelRequest {
        provider_id: provider.into(),
        model_id: "test-model".into(),
        parts: vec![
            MessagePart::text("Is the marker present?"),
            MessagePart::image(vec![0x89, b'P', b'N', b'G', 1, 2, 3]),
        ],
        sampling: Sampling::default(),
        tag: None,
    }
}

#[test]
fn openai_backend_sends_bearer_auth_and_data_url() {
    let (base, rx, handle) = serve(vec![(200, openai_ok("yes"))], false);
    let key_env = "VIC_TEST_KEY_OPENAI_SHAPE";
    std::env::set_var(key_env, "sk-test-123");
    let backend = OpenAiCompatible::new(format!("{base}/v1"), key_env, 2_000);
    let response = backend.invoke(&request("api")).unwrap();
    assert_eq!(response.text, "yes");
    let exchange = rx.recv().unwrap();
    handle.join().unwrap();
    let req = exchange.request;
    assert!(req.starts_with("POST /v1/chat/completions"), "{req}");
    assert!(req.contains("authorization: Bearer sk-test-123") || req.contains("Authorization: Bearer sk-test-123"), "{req}");
    assert!(req.contains("data:image/png;base64,"), "{req}");
    assert!(req.contains("Is the marker present?"), "{req}");
}

#[test]
fn gemini_backend_uses_key_header_and_model_path() {
    let body = serde_json::json!({
        "candidates": [{
            "content": {"parts": [{"text": "no"}]},
            "finishReason": "STOP"
        }]
    })
    .to_string();
    let (base, rx, handle) = serve(vec![(200, body)], false);
    let key_env = "VIC_TEST_KEY_GEMINI_SHAPE";
    std::env::set_var(key_env, "g-key-9");
    let backend = GeminiCompatible::new(base.clone(), key_env, 2_000);
    let response = backend.invoke(&request("api")).unwrap();
    assert_eq!(response.text, "no");
    let exchange = rx.recv().unwrap();
    handle.join().unwrap();
    let req = exchange.request;
    assert!(
        req.starts_with("POST /models/test-model:generateContent"),
        "{req}"
    );
    assert!(req.to_ascii_lowercase().contains("x-goog-api-key: g-key-9"), "{req}");
    assert!(req.contains("inline_data"), "{req}");
}

fn pool_with(backend: Arc<dyn Backend>, id: &str, retry: RetryConfig) -> ProviderPool {
    let mut config = ProviderConfig {
        id: id.into(),
        kind: ProviderKind::OpenaiCompat,
        base_url: Some("unused-by-pool".into()),
        api_key_env: None,
        timeout_ms: None,
        rate: Default::default(),
        retry,
        script: None,
    };
    config.api_key_env = Some("VIC_TEST_KEY_POOL".into());
    std::env::set_var("VIC_TEST_KEY_POOL", "k");
    let mut pool = ProviderPool::new();
    pool.register(config, backend);
    pool
}

#[test]
fn pool_retries_429_from_a_real_server() {
    let (base, _rx, handle) = serve(
        vec![
            (429, "{\"error\":\"slow down\"}".to_string()),
            (200, openai_ok("eventually")),
        ],
        false,
    );
    std::env::set_var("VIC_TEST_KEY_RETRY", "k");
    let backend = Arc::new(OpenAiCompatible::new(base, "VIC_TEST_KEY_RETRY", 2_000));
    let pool = pool_with(
        backend,
        "api",
        RetryConfig {
            max_attempts: 3,
            base_backoff_ms: 1,
            retry_on: vec![RetryOn::Http429],
        },
    );
    let response = pool.complete(&request("api")).unwrap();
    assert_eq!(response.text, "eventually");
    assert_eq!(pool.backend_calls("api"), 2);
    handle.join().unwrap();
}

#[test]
fn client_timeout_is_classified_and_retried() {
    // server accepts one connection and never replies
    let (base, _rx, handle) = serve(vec![], true);
    std::env::set_var("VIC_TEST_KEY_TIMEOUT", "k");
    let backend = Arc::new(OpenAiCompatible::new(base, "VIC_TEST_KEY_TIMEOUT", 150));
    let pool = pool_with(
        backend,
        "api",
        RetryConfig {
            max_attempts: 1,
            base_backoff_ms: 1,
            retry_on: vec![RetryOn::Timeout],
        },
    );
    let err = pool.complete(&request("api")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("gave up after 1 attempts"), "{msg}");
    assert!(msg.to_ascii_lowercase().contains("timed out") || msg.contains("timeout"), "{msg}");
    handle.join().unwrap();
}
