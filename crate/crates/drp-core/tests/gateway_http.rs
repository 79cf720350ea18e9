//! Remote transport tests against a minimal local HTTP server: wire-body
//! conformance, auth header, retry/backoff classes, and cache interplay.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::thread::JoinHandle;

use drp_core::gateway::{
    wire_body, ChatMessage, ChatRequest, Gateway, GatewayError, ProviderKind, ProviderSpec,
};

struct CapturedRequest {
    headers: String,
    body: String,
}

/// Serve `responses` in order (status, body), capturing each request.
fn spawn_server(responses: Vec<(u16, String)>) -> (SocketAddr, JoinHandle<Vec<CapturedRequest>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut captured = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let (headers, content_length) = loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                if let Some(end) = find_header_end(&buf) {
                    let headers = String::from_utf8_lossy(&buf[..end]).to_string();
                    let length = headers
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(str::trim)
                                .map(String::from)
                        })
                        .and_then(|v| v.parse::<usize>().ok())
                        .unwrap_or(0);
                    break (headers, length);
                }
            };
            let body_start = find_header_end(&buf).unwrap() + 4;
            while buf.len() < body_start + content_length {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
            }
            let request_body =
                String::from_utf8_lossy(&buf[body_start..body_start + content_length]).to_string();
            captured.push(CapturedRequest {
                headers,
                body: request_body,
            });

            let reason = if status == 200 { "OK" } else { "ERR" };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Length: {}\r\nContent-Type: application/json\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
        captured
    });
    (addr, handle)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn request() -> ChatRequest {
    ChatRequest {
        model_id: "remote-model".into(),
        messages: vec![ChatMessage::system("be brief"), ChatMessage::user("hello")],
        temperature: 0.0,
        max_tokens: 64,
        seed_hint: None,
    }
}

fn spec_for(addr: SocketAddr, max_retries: u32) -> ProviderSpec {
    ProviderSpec {
        kind: ProviderKind::Remote,
        base_url: Some(format!("http://{addr}")),
        model_id: "remote-model".into(),
        request_timeout_s: 5,
        max_retries,
        backoff_base_ms: 1,
        fixture_dir: None,
    }
}

fn ok_body(content: &str) -> String {
    serde_json::json!({ "choices": [ { "message": { "content": content } } ] }).to_string()
}

#[test]
fn sends_documented_body_and_auth_header() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let (addr, server) = spawn_server(vec![(200, ok_body("<think>steps</think>Hello there"))]);
    let gateway = Gateway::new(None, 2).unwrap();
    let r = request();
    let response = gateway.complete(&r, &spec_for(addr, 0)).unwrap();
    assert_eq!(response.content, "Hello there");
    assert_eq!(response.reasoning_trace.as_deref(), Some("steps"));
    assert!(!response.cached);

    let captured = server.join().unwrap();
    assert_eq!(captured.len(), 1);
    assert_eq!(
        captured[0].body,
        wire_body(&r),
        "body must match the documented protocol"
    );
    assert!(captured[0].headers.contains("POST /v1/chat/completions"));
    assert!(captured[0].headers.contains("Bearer test-key"));
    assert_eq!(gateway.stats().remote_calls, 1);
}

#[test]
fn retries_on_server_errors_then_succeeds() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let (addr, server) = spawn_server(vec![
        (500, "{}".into()),
        (429, "{}".into()),
        (200, ok_body("recovered")),
    ]);
    let gateway = Gateway::new(None, 2).unwrap();
    let response = gateway.complete(&request(), &spec_for(addr, 2)).unwrap();
    assert_eq!(response.content, "recovered");
    assert_eq!(server.join().unwrap().len(), 3);
}

#[test]
fn retries_exhausted_surface_last_status() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let (addr, server) = spawn_server(vec![(503, "{}".into()), (503, "{}".into())]);
    let gateway = Gateway::new(None, 2).unwrap();
    let result = gateway.complete(&request(), &spec_for(addr, 1));
    assert!(matches!(result, Err(GatewayError::Http { status: 503 })));
    assert_eq!(server.join().unwrap().len(), 2);
}

#[test]
fn client_errors_fail_immediately() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let (addr, server) = spawn_server(vec![(400, "{}".into())]);
    let gateway = Gateway::new(None, 2).unwrap();
    let result = gateway.complete(&request(), &spec_for(addr, 3));
    assert!(matches!(result, Err(GatewayError::Http { status: 400 })));
    assert_eq!(server.join().unwrap().len(), 1, "4xx must not be retried");
}

#[test]
fn unparseable_body_is_a_protocol_error() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let (addr, server) = spawn_server(vec![(200, "not json".into())]);
    let gateway = Gateway::new(None, 2).unwrap();
    let result = gateway.complete(&request(), &spec_for(addr, 0));
    assert!(matches!(result, Err(GatewayError::Protocol(_))));
    server.join().unwrap();
}

#[test]
fn remote_embeddings_protocol_round_trip() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let body = serde_json::json!({
        "data": [
            { "embedding": [1.0, 0.0, 0.0] },
            { "embedding": [0.0, 1.0, 0.0] }
        ]
    })
    .to_string();
    let (addr, server) = spawn_server(vec![(200, body)]);
    let provider = drp_core::embed::RemoteEmbeddingProvider::new(
        &format!("http://{addr}"),
        "embed-model",
        3,
        5,
    );
    use drp_core::embed::EmbeddingProvider;
    let vectors = provider
        .embed_batch(&["first text", "second text"])
        .unwrap();
    assert_eq!(vectors.len(), 2);
    assert_eq!(vectors[0].values, vec![1.0, 0.0, 0.0]);
    assert_eq!(vectors[1].values, vec![0.0, 1.0, 0.0]);

    let captured = server.join().unwrap();
    assert!(captured[0].headers.contains("POST /v1/embeddings"));
    assert!(captured[0].headers.contains("Bearer test-key"));
    let sent: serde_json::Value = serde_json::from_str(&captured[0].body).unwrap();
    assert_eq!(sent["model"], "embed-model");
    assert_eq!(sent["input"][0], "first text");
    assert_eq!(sent["input"][1], "second text");
}

#[test]
fn remote_embeddings_dimension_mismatch_rejected() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let body = serde_json::json!({ "data": [ { "embedding": [1.0, 2.0] } ] }).to_string();
    let (addr, server) = spawn_server(vec![(200, body)]);
    let provider = drp_core::embed::RemoteEmbeddingProvider::new(
        &format!("http://{addr}"),
        "embed-model",
        3,
        5,
    );
    use drp_core::embed::EmbeddingProvider;
    let result = provider.embed_batch(&["text"]);
    assert!(matches!(
        result,
        Err(drp_core::embed::EmbedError::DimensionMismatch {
            expected: 3,
            actual: 2
        })
    ));
    server.join().unwrap();
}

#[test]
fn cache_prevents_second_remote_call() {
    std::env::set_var("DRP_API_KEY", "test-key");
    let cache = tempfile::tempdir().unwrap();
    let (addr, server) = spawn_server(vec![(200, ok_body("cached answer"))]);
    let gateway = Gateway::new(Some(cache.path().to_path_buf()), 2).unwrap();
    let spec = spec_for(addr, 0);

    let first = gateway.cached_complete(&request(), &spec).unwrap();
    assert!(!first.cached);
    let second = gateway.cached_complete(&request(), &spec).unwrap();
    assert!(second.cached);
    assert_eq!(second.content, "cached answer");
    assert_eq!(server.join().unwrap().len(), 1);
    assert_eq!(gateway.stats().remote_calls, 1);
    assert_eq!(gateway.stats().cache_hits, 1);
}
