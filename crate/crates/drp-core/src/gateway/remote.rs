//! Remote chat-completions transport with retry/backoff.
//!
//! POSTs the documented body to `{base_url}/v1/chat/completions` with
//! `Authorization: Bearer $DRP_API_KEY`. Transport errors and HTTP
//! 429/5xx are retried with exponential backoff (base and retry count
//! from the provider settings, factor 2); other statuses fail
//! immediately.

use std::time::Duration;

use serde::Deserialize;

use super::{wire_body, ChatRequest, Gateway, GatewayError, ProviderSpec, RawCompletion};

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
    #[serde(default)]
    reasoning_content: Option<String>,
}

fn api_key() -> String {
    std::env::var("DRP_API_KEY").unwrap_or_default()
}

pub(crate) fn serve(
    gateway: &Gateway,
    request: &ChatRequest,
    spec: &ProviderSpec,
) -> Result<RawCompletion, GatewayError> {
    let base = spec.base_url.as_deref().expect("checked by spec.check");
    let url = format!("{}/v1/chat/completions", base.trim_end_matches('/'));
    let body = wire_body(request);

    let attempts = spec.max_retries + 1;
    let mut timed_out = false;
    let mut last_error: Option<GatewayError> = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            let backoff = spec.backoff_base_ms.saturating_mul(1 << (attempt - 1));
            std::thread::sleep(Duration::from_millis(backoff));
        }
        let sent = gateway
            .http_client()
            .post(&url)
            .timeout(Duration::from_secs(spec.request_timeout_s))
            .header("Authorization", format!("Bearer {}", api_key()))
            .header("Content-Type", "application/json")
            .body(body.clone())
            .send();
        match sent {
            Err(e) => {
                timed_out = e.is_timeout();
                last_error = Some(GatewayError::Transport(e.to_string()));
            }
            Ok(response) => {
                let status = response.status().as_u16();
                if status == 429 || status >= 500 {
                    last_error = Some(GatewayError::Http { status });
                    continue;
                }
                if status >= 400 {
                    return Err(GatewayError::Http { status });
                }
                let text = response
                    .text()
                    .map_err(|e| GatewayError::Transport(e.to_string()))?;
                return parse_body(&text);
            }
        }
    }
    if timed_out {
        return Err(GatewayError::Timeout(attempts));
    }
    Err(last_error.expect("at least one attempt"))
}

fn parse_body(text: &str) -> Result<RawCompletion, GatewayError> {
    let parsed: WireResponse = serde_json::from_str(text)
        .map_err(|e| GatewayError::Protocol(format!("chat-completions body: {e}")))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Protocol("response has no choices".into()))?;
    Ok(RawCompletion {
        content: choice.message.content,
        reasoning_trace: choice.message.reasoning_content,
    })
}
