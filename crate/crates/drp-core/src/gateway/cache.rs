//! Content-addressed response cache: one file per request digest, written
//! via temp-then-atomic-rename so concurrent writers cannot corrupt
//! entries.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{ChatResponse, GatewayError};

#[derive(Serialize, Deserialize)]
pub(crate) struct StoredResponse {
    pub content: String,
    pub reasoning_trace: Option<String>,
    pub model_id: String,
    pub latency_ms: u64,
}

fn io_err(path: &Path, source: std::io::Error) -> GatewayError {
    GatewayError::CacheIo {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn read(cache_dir: &Path, digest: &str) -> Result<Option<StoredResponse>, GatewayError> {
    let path = cache_dir.join(format!("{digest}.json"));
    let bytes = match fs::read(&path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(&path, e)),
    };
    let stored = serde_json::from_slice(&bytes)
        .map_err(|e| GatewayError::Protocol(format!("corrupt cache entry {digest}: {e}")))?;
    Ok(Some(stored))
}

static WRITE_COUNTER: AtomicU64 = AtomicU64::new(0);

pub(crate) fn write(
    cache_dir: &Path,
    digest: &str,
    response: &ChatResponse,
) -> Result<(), GatewayError> {
    let stored = StoredResponse {
        content: response.content.clone(),
        reasoning_trace: response.reasoning_trace.clone(),
        model_id: response.model_id.clone(),
        latency_ms: response.latency_ms,
    };
    let bytes = serde_json::to_vec(&stored).expect("response serializes");
    let unique = WRITE_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = cache_dir.join(format!(".{digest}.{}.{unique}.tmp", std::process::id()));
    fs::write(&tmp, &bytes).map_err(|e| io_err(&tmp, e))?;
    let target = cache_dir.join(format!("{digest}.json"));
    fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))
}
