//! Tolerant JSON extraction from model replies.

use crate::error::{ReasonerError, Result};
use serde_json::Value;

/// Strips markdown fences and surrounding prose, then parses the outermost
/// JSON object.
pub fn extract_json_object(reply: &str) -> Result<Value> {
    let trimmed = strip_fences(reply);
    let start = trimmed
        .find('{')
        .ok_or_else(|| ReasonerError::BadResponse("no JSON object in reply".into()))?;
    let end = trimmed
        .rfind('}')
        .ok_or_else(|| ReasonerError::BadResponse("unterminated JSON object".into()))?;
    if end < start {
        return Err(ReasonerError::BadResponse("malformed JSON object".into()));
    }
    serde_json::from_str(&trimmed[start..=end])
        .map_err(|e| ReasonerError::BadResponse(format!("invalid JSON: {e}")))
}

fn strip_fences(reply: &str) -> &str {
    let trimmed = reply.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    // drop the info string (e.g. "json") up to the first newline
    let rest = match rest.find('\n') {
        Some(pos) => &rest[pos + 1..],
        None => rest,
    };
    rest.strip_suffix("```").unwrap_or(rest).trim()
}
