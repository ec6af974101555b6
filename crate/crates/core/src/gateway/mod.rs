//! Chat-completion access with greedy decoding, an on-disk response cache
//! and bounded-parallel batches.
//!
//! Two backends exist: an OpenAI-compatible HTTP endpoint (e.g. a vLLM
//! server) and a scripted mock that answers from a digest → response map.

mod cache;
mod http;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::Prompt;

pub use cache::ResponseCache;

/// Environment variable holding the API key for HTTP backends.
pub const API_KEY_ENV: &str = "SEEKSOLVE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    1024
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            temperature: 0.0,
            seed: 0,
            max_tokens: default_max_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    HttpOpenaiCompatible {
        /// Base URL such as `http://host:8000/v1`; `/chat/completions` is
        /// appended unless already present.
        endpoint: String,
        model_name: String,
    },
    ScriptedMock {
        model_name: String,
        /// Prompt digest → response.
        #[serde(default)]
        script: BTreeMap<String, String>,
        /// JSON object file merged into `script`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        script_file: Option<PathBuf>,
    },
}

impl BackendSpec {
    pub fn model_name(&self) -> &str {
        match self {
            BackendSpec::HttpOpenaiCompatible { model_name, .. } | BackendSpec::ScriptedMock { model_name, .. } => {
                model_name
            }
        }
    }

    pub fn mock(model_name: impl Into<String>, script: BTreeMap<String, String>) -> Self {
        BackendSpec::ScriptedMock {
            model_name: model_name.into(),
            script,
            script_file: None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("transient backend failure after {attempts} attempts: {message}")]
    Transient { attempts: u32, message: String },
    #[error("backend rejected the request (HTTP {status}): {body}")]
    Permanent { status: u16, body: String },
    #[error("mock script has no response for prompt digest {0}")]
    Fixture(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("backend setup: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// SHA-256 over length-prefixed fields, hex encoded.
fn digest_fields(fields: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for f in fields {
        h.update((f.len() as u64).to_le_bytes());
        h.update(f);
    }
    hex::encode(h.finalize())
}

/// Content digest of a prompt's text; the key mock scripts are written
/// against.
pub fn prompt_digest(prompt: &Prompt) -> String {
    digest_fields(&[prompt.system_text.as_bytes(), prompt.user_text.as_bytes()])
}

/// Cache key: prompt text, model and every decode parameter.
pub fn cache_key(prompt: &Prompt, model: &str, decode: &DecodeConfig) -> String {
    digest_fields(&[
        prompt.system_text.as_bytes(),
        prompt.user_text.as_bytes(),
        model.as_bytes(),
        &decode.temperature.to_le_bytes(),
        &decode.seed.to_le_bytes(),
        &decode.max_tokens.to_le_bytes(),
    ])
}

enum Backend {
    Http(http::HttpBackend),
    Mock(BTreeMap<String, String>),
}

enum CallError {
    Retryable(String),
    Fatal(GatewayError),
}

pub struct Gateway {
    model: String,
    backend: Backend,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl Gateway {
    pub fn new(spec: &BackendSpec) -> Result<Self, GatewayError> {
        let backend = match spec {
            BackendSpec::HttpOpenaiCompatible { endpoint, model_name } => Backend::Http(http::HttpBackend::new(
                endpoint,
                model_name,
                std::env::var(API_KEY_ENV).ok(),
            )),
            BackendSpec::ScriptedMock {
                script, script_file, ..
            } => {
                let mut merged = script.clone();
                if let Some(path) = script_file {
                    merged.extend(load_script(path)?);
                }
                Backend::Mock(merged)
            }
        };
        Ok(Gateway {
            model: spec.model_name().to_string(),
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        })
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// Requests that reached the backend (cache hits excluded).
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Largest number of concurrent `complete` calls observed.
    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn complete(&self, prompt: &Prompt, decode: &DecodeConfig) -> Result<String, GatewayError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        let out = self.complete_inner(prompt, decode);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }

    fn complete_inner(&self, prompt: &Prompt, decode: &DecodeConfig) -> Result<String, GatewayError> {
        let key = cache_key(prompt, &self.model, decode);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key)? {
                return Ok(hit);
            }
        }
        let response = self.call_with_retry(prompt, decode)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &self.model, decode, &response)?;
        }
        Ok(response)
    }

    fn call_with_retry(&self, prompt: &Prompt, decode: &DecodeConfig) -> Result<String, GatewayError> {
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.retry.base_delay * 2u32.pow(attempt - 1);
                log::debug!("retrying in {delay:?} after: {last}");
                std::thread::sleep(delay);
            }
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.call_once(prompt, decode) {
                Ok(text) => return Ok(text),
                Err(CallError::Fatal(e)) => return Err(e),
                Err(CallError::Retryable(msg)) => last = msg,
            }
        }
        Err(GatewayError::Transient {
            attempts,
            message: last,
        })
    }

    fn call_once(&self, prompt: &Prompt, decode: &DecodeConfig) -> Result<String, CallError> {
        match &self.backend {
            Backend::Mock(script) => {
                let digest = prompt_digest(prompt);
                script
                    .get(&digest)
                    .cloned()
                    .ok_or(CallError::Fatal(GatewayError::Fixture(digest)))
            }
            Backend::Http(client) => client.chat(prompt, decode),
        }
    }

    /// Runs every prompt with at most `parallelism` in flight. Output slot
    /// `i` holds the result for `prompts[i]`.
    pub fn complete_batch(
        &self,
        prompts: &[Prompt],
        decode: &DecodeConfig,
        parallelism: usize,
    ) -> Vec<Result<String, GatewayError>> {
        let workers = parallelism.max(1).min(prompts.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<String, GatewayError>>>> = Mutex::new(vec![None; prompts.len()]);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(prompt) = prompts.get(i) else { break };
                    let out = self.complete(prompt, decode);
                    slots.lock().expect("slot lock")[i] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .expect("slot lock")
            .into_iter()
            .map(|s| s.expect("every slot filled"))
            .collect()
    }
}

/// Reads a mock script file: a JSON object of digest → response.
pub fn load_script(path: &Path) -> Result<BTreeMap<String, String>, GatewayError> {
    let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Setup(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| GatewayError::Setup(format!("{}: {e}", path.display())))
}
