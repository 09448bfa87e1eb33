//! Chat-completion wire client shared by dataset generation and the remote
//! judge. The payload is the common convention — `{model, messages, temperature}`
//! POSTed as JSON, with the completion text read from
//! `choices[0].message.content` — so any compatible gateway works.
//!
//! Payload construction and reply parsing are plain functions; the transport
//! lives behind the `remote` feature so the crate builds for targets without
//! an HTTP stack.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
}

/// Connection settings for one external chat-completion service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer credential;
    /// empty means unauthenticated.
    #[serde(default)]
    pub credential_env: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retries: u32,
}

fn default_timeout_secs() -> u64 {
    30
}

/// The JSON body for one single-message request.
pub fn build_request(model: &str, content: &str, temperature: f64) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [{"role": "user", "content": content}],
        "temperature": temperature,
    })
}

/// Pulls the completion text out of a service reply.
pub fn extract_completion(reply: &serde_json::Value) -> Result<String, ChatError> {
    reply
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| {
            ChatError::Protocol("reply has no choices[0].message.content field".to_string())
        })
}

/// Sends one request, retrying on transport failure. Returns the completion
/// text and the number of retries that were needed.
#[cfg(feature = "remote")]
pub fn request_completion(
    config: &ServiceConfig,
    content: &str,
) -> Result<(String, u32), ChatError> {
    let credential = if config.credential_env.is_empty() {
        None
    } else {
        Some(
            std::env::var(&config.credential_env)
                .map_err(|_| ChatError::MissingCredential(config.credential_env.clone()))?,
        )
    };
    let client = reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(config.timeout_secs))
        .build()
        .map_err(|e| ChatError::Transport { attempts: 0, message: e.to_string() })?;
    let body = build_request(&config.model, content, config.temperature);

    let mut last_err = String::new();
    for attempt in 0..=config.retries {
        let mut req = client.post(&config.endpoint).json(&body);
        if let Some(cred) = &credential {
            req = req.bearer_auth(cred);
        }
        match req.send() {
            Ok(resp) => {
                if !resp.status().is_success() {
                    return Err(ChatError::Protocol(format!(
                        "service returned status {}",
                        resp.status()
                    )));
                }
                let value: serde_json::Value = resp
                    .json()
                    .map_err(|e| ChatError::Protocol(format!("reply is not JSON: {e}")))?;
                return Ok((extract_completion(&value)?, attempt));
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(ChatError::Transport { attempts: config.retries + 1, message: last_err })
}
