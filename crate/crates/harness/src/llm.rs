//! Minimal client for an OpenAI-style text completion endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const API_KEY_VAR: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Total attempts per request, including the first.
    #[serde(default = "default_attempts")]
    pub attempts: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    256
}

fn default_attempts() -> usize {
    3
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            attempts: default_attempts(),
            timeout_ms: default_timeout_ms(),
        }
    }

    /// Greedy decoding.
    pub fn greedy(mut self) -> Self {
        self.temperature = 0.0;
        self
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    text: String,
}

pub struct LlmClient {
    config: EndpointConfig,
    api_key: String,
    http: reqwest::Client,
}

impl LlmClient {
    pub fn new(config: EndpointConfig, api_key: String) -> Result<Self> {
        if config.attempts == 0 {
            return Err(HarnessError::Config("attempts must be at least 1".into()));
        }
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(LlmClient {
            config,
            api_key,
            http,
        })
    }

    /// Reads the key from `LLM_API_KEY`.
    pub fn from_env(config: EndpointConfig) -> Result<Self> {
        let key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or(HarnessError::MissingApiKey)?;
        LlmClient::new(config, key)
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Sends `prompt`, retrying transport failures and 5xx responses with a
    /// short linear backoff.
    pub async fn complete(&self, prompt: &str) -> Result<String> {
        let url = format!("{}/completions", self.config.base_url.trim_end_matches('/'));
        let body = CompletionRequest {
            model: &self.config.model_name,
            prompt,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut last = String::new();
        for attempt in 1..=self.config.attempts {
            if attempt > 1 {
                tokio::time::sleep(Duration::from_millis(100 * attempt as u64)).await;
            }
            let sent = self
                .http
                .post(&url)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .await;
            let response = match sent {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = response.status();
            if status.is_server_error() {
                last = format!("status {status}");
                continue;
            }
            if !status.is_success() {
                let body = response.text().await.unwrap_or_default();
                return Err(HarnessError::Status {
                    status: status.as_u16(),
                    body,
                });
            }
            let parsed: CompletionResponse = match response.json().await {
                Ok(p) => p,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let text = parsed.choices.into_iter().next().map(|c| c.text).unwrap_or_default();
            if text.trim().is_empty() {
                return Err(HarnessError::EmptyReply);
            }
            return Ok(text);
        }
        Err(HarnessError::Transport {
            attempts: self.config.attempts,
            message: last,
        })
    }
}
