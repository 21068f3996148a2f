//! Chat-completion HTTP client: JSON POST, bearer auth from the environment,
//! exponential backoff on 5xx and transport failures, fatal 4xx.

use crate::error::{ReasonerError, Result};
use crate::PromptBundle;
use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct HttpLlmClient {
    pub endpoint: String,
    pub model: String,
    /// Name of the env var holding the bearer token.
    pub token_env: String,
    pub temperature: f64,
    pub attempts: usize,
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl HttpLlmClient {
    pub fn new(endpoint: String, model: String, token_env: String, temperature: f64) -> Self {
        HttpLlmClient {
            endpoint,
            model,
            token_env,
            temperature,
            attempts: 3,
            base_delay: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads endpoint/model/token names from `TABFLOW_LLM_*`.
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var("TABFLOW_LLM_ENDPOINT").map_err(|_| {
            ReasonerError::Transport {
                attempts: 0,
                message: "TABFLOW_LLM_ENDPOINT is not set".into(),
            }
        })?;
        let model = std::env::var("TABFLOW_LLM_MODEL").unwrap_or_else(|_| "gpt-4".into());
        Ok(HttpLlmClient::new(
            endpoint,
            model,
            "TABFLOW_LLM_TOKEN".into(),
            0.0,
        ))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// Sends the prompt bundle as a chat completion and returns the assistant
/// text. Retries (with exponential backoff) on 5xx and transport errors;
/// 4xx is fatal and carries the response body.
pub fn call_llm(client: &HttpLlmClient, bundle: &PromptBundle) -> Result<String> {
    let token = std::env::var(&client.token_env)
        .map_err(|_| ReasonerError::MissingToken(client.token_env.clone()))?;

    let columns: Vec<&str> = bundle
        .serialized_columns
        .iter()
        .map(|c| c.text.as_str())
        .collect();
    let body = json!({
        "model": client.model,
        "messages": [
            {"role": "system", "content": bundle.general_prompt},
            {"role": "user", "content": format!("{}\n\nColumns:\n{}", bundle.instructions, columns.join("\n"))},
        ],
        "temperature": client.temperature,
    });

    let agent = ureq::Agent::config_builder()
        .timeout_global(Some(client.timeout))
        .http_status_as_error(false)
        .build()
        .new_agent();

    let mut last_message = String::new();
    for attempt in 0..client.attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(client.base_delay * 2u32.pow(attempt as u32 - 1));
        }
        match agent
            .post(&client.endpoint)
            .header("Authorization", &format!("Bearer {token}"))
            .send_json(&body)
        {
            Ok(mut response) => {
                let status = response.status().as_u16();
                if (200..300).contains(&status) {
                    let parsed: ChatResponse =
                        response.body_mut().read_json().map_err(|e| {
                            ReasonerError::BadResponse(format!("chat response shape: {e}"))
                        })?;
                    let content = parsed
                        .choices
                        .first()
                        .map(|c| c.message.content.clone())
                        .ok_or_else(|| {
                            ReasonerError::BadResponse("empty choices in chat response".into())
                        })?;
                    return Ok(content);
                }
                let body_text = response
                    .body_mut()
                    .read_to_string()
                    .unwrap_or_else(|_| "<unreadable body>".into());
                if (400..500).contains(&status) {
                    return Err(ReasonerError::BadStatus {
                        status,
                        body: body_text,
                    });
                }
                last_message = format!("status {status}: {body_text}");
                log::warn!("LLM call attempt {} failed: {last_message}", attempt + 1);
            }
            Err(e) => {
                last_message = e.to_string();
                log::warn!("LLM call attempt {} failed: {last_message}", attempt + 1);
            }
        }
    }
    Err(ReasonerError::Transport {
        attempts: client.attempts,
        message: last_message,
    })
}
