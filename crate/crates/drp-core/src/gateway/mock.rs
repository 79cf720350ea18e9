//! Deterministic mock provider backed by a fixture directory.
//!
//! Lookup order: `<digest>.json` keyed by the canonical request hash,
//! then the next entry of an optional `script.jsonl` consumed in call
//! order. Anything else is a [`GatewayError::FixtureMiss`].

use std::fs;
use std::io::BufRead;

use serde::Deserialize;

use super::{
    canonical_request_hash, ChatRequest, Gateway, GatewayError, ProviderSpec, RawCompletion,
};

pub(crate) const SCRIPT_FILE: &str = "script.jsonl";

#[derive(Deserialize)]
struct FixtureEntry {
    content: String,
    #[serde(default)]
    reasoning_trace: Option<String>,
}

pub(crate) fn serve(
    gateway: &Gateway,
    request: &ChatRequest,
    spec: &ProviderSpec,
) -> Result<RawCompletion, GatewayError> {
    let dir = spec.fixture_dir.as_ref().expect("checked by spec.check");
    let digest = canonical_request_hash(request);

    let keyed = dir.join(format!("{digest}.json"));
    if keyed.is_file() {
        let bytes = fs::read(&keyed).map_err(|source| GatewayError::CacheIo {
            path: keyed.display().to_string(),
            source,
        })?;
        let entry: FixtureEntry = serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::Protocol(format!("fixture {digest}: {e}")))?;
        return Ok(RawCompletion {
            content: entry.content,
            reasoning_trace: entry.reasoning_trace,
        });
    }

    let script = dir.join(SCRIPT_FILE);
    if script.is_file() {
        let file = fs::File::open(&script).map_err(|source| GatewayError::CacheIo {
            path: script.display().to_string(),
            source,
        })?;
        let index = gateway.next_script_index(dir);
        let line = std::io::BufReader::new(file)
            .lines()
            .map_while(Result::ok)
            .filter(|l| !l.trim().is_empty())
            .nth(index)
            .ok_or_else(|| GatewayError::FixtureMiss(digest.clone()))?;
        let entry: FixtureEntry = serde_json::from_str(&line)
            .map_err(|e| GatewayError::Protocol(format!("script entry {index}: {e}")))?;
        return Ok(RawCompletion {
            content: entry.content,
            reasoning_trace: entry.reasoning_trace,
        });
    }

    Err(GatewayError::FixtureMiss(digest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;
    use std::io::Write;

    fn request(text: &str) -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            messages: vec![ChatMessage::user(text)],
            temperature: 0.0,
            max_tokens: 16,
            seed_hint: None,
        }
    }

    fn write_fixture(dir: &std::path::Path, request: &ChatRequest, content: &str) {
        let digest = canonical_request_hash(request);
        let body = serde_json::json!({ "content": content });
        fs::write(dir.join(format!("{digest}.json")), body.to_string()).unwrap();
    }

    #[test]
    fn digest_keyed_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let r = request("hello there");
        write_fixture(dir.path(), &r, "hello");
        let gateway = Gateway::new(None, 1).unwrap();
        let spec = ProviderSpec::mock("m", dir.path());
        let response = gateway.complete(&r, &spec).unwrap();
        assert_eq!(response.content, "hello");
        assert!(!response.cached);
    }

    #[test]
    fn missing_fixture_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::new(None, 1).unwrap();
        let spec = ProviderSpec::mock("m", dir.path());
        let result = gateway.complete(&request("nothing here"), &spec);
        assert!(matches!(result, Err(GatewayError::FixtureMiss(_))));
    }

    #[test]
    fn script_consumed_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut script = fs::File::create(dir.path().join(SCRIPT_FILE)).unwrap();
        writeln!(script, r#"{{"content":"first"}}"#).unwrap();
        writeln!(script, r#"{{"content":"second"}}"#).unwrap();
        let gateway = Gateway::new(None, 1).unwrap();
        let spec = ProviderSpec::mock("m", dir.path());
        assert_eq!(
            gateway.complete(&request("a"), &spec).unwrap().content,
            "first"
        );
        assert_eq!(
            gateway.complete(&request("b"), &spec).unwrap().content,
            "second"
        );
        assert!(matches!(
            gateway.complete(&request("c"), &spec),
            Err(GatewayError::FixtureMiss(_))
        ));
    }

    #[test]
    fn digest_fixture_wins_over_script() {
        let dir = tempfile::tempdir().unwrap();
        let r = request("keyed");
        write_fixture(dir.path(), &r, "keyed answer");
        let mut script = fs::File::create(dir.path().join(SCRIPT_FILE)).unwrap();
        writeln!(script, r#"{{"content":"scripted"}}"#).unwrap();
        let gateway = Gateway::new(None, 1).unwrap();
        let spec = ProviderSpec::mock("m", dir.path());
        assert_eq!(gateway.complete(&r, &spec).unwrap().content, "keyed answer");
        // Script cursor untouched by keyed hits.
        assert_eq!(
            gateway.complete(&request("other"), &spec).unwrap().content,
            "scripted"
        );
    }

    #[test]
    fn think_prefix_stripped_from_fixture_content() {
        let dir = tempfile::tempdir().unwrap();
        let r = request("reasoned");
        write_fixture(
            dir.path(),
            &r,
            "<think>chain of thought</think>Final answer",
        );
        let gateway = Gateway::new(None, 1).unwrap();
        let spec = ProviderSpec::mock("m", dir.path());
        let response = gateway.complete(&r, &spec).unwrap();
        assert_eq!(response.content, "Final answer");
        assert_eq!(
            response.reasoning_trace.as_deref(),
            Some("chain of thought")
        );
        assert!(!response.content.contains("<think>"));
    }
}
