//! OpenAI-compatible `/chat/completions` client.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CallError, DecodeConfig, GatewayError};
use crate::prompt::Prompt;

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    seed: u64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

pub(super) struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub(super) fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(600)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        HttpBackend {
            agent,
            url,
            model: model.to_string(),
            api_key,
        }
    }

    pub(super) fn chat(&self, prompt: &Prompt, decode: &DecodeConfig) -> Result<String, CallError> {
        let mut messages = Vec::with_capacity(2);
        if !prompt.system_text.is_empty() {
            messages.push(Message {
                role: "system",
                content: &prompt.system_text,
            });
        }
        messages.push(Message {
            role: "user",
            content: &prompt.user_text,
        });
        let body = serde_json::to_string(&ChatRequest {
            model: &self.model,
            messages,
            temperature: decode.temperature,
            seed: decode.seed,
            max_tokens: decode.max_tokens,
        })
        .expect("request serializes");

        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send(body.as_bytes())
            .map_err(|e| CallError::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| CallError::Retryable(e.to_string()))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => return Err(CallError::Retryable(format!("HTTP {status}: {text}"))),
            _ => {
                return Err(CallError::Fatal(GatewayError::Permanent { status, body: text }));
            }
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| CallError::Fatal(GatewayError::Protocol(e.to_string())))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| CallError::Fatal(GatewayError::Protocol("no choices".into())))?;
        if choice.finish_reason.as_deref() == Some("length") {
            log::warn!(
                "response truncated at max_tokens = {} ({})",
                decode.max_tokens,
                prompt.variant_tag
            );
        }
        Ok(choice.message.content.unwrap_or_default())
    }
}
