//! Chat-completion wire protocol: a single blocking POST per decision.

use serde::{Deserialize, Serialize};

/// Environment variable holding the bearer token.
pub const API_KEY_VAR: &str = "ROUNDTABLE_API_KEY";
/// Environment variable overriding the provider base URL.
pub const BASE_URL_VAR: &str = "ROUNDTABLE_BASE_URL";
/// Paper default model.
pub const DEFAULT_MODEL: &str = "gpt-4o-mini-2024-07-18";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatCompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    /// Always zero: decisions must be reproducible given the provider.
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatCompletionResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("missing {API_KEY_VAR} environment variable")]
    MissingApiKey,
    #[error("request failed: {0}")]
    Request(String),
    #[error("provider returned status {0}")]
    Status(u16),
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone)]
pub struct ChatClientConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

impl Default for ChatClientConfig {
    fn default() -> Self {
        ChatClientConfig {
            base_url: std::env::var(BASE_URL_VAR).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string()),
            model: DEFAULT_MODEL.to_string(),
            api_key: std::env::var(API_KEY_VAR).ok(),
            timeout_secs: 60,
        }
    }
}

/// Blocking chat-completion client; safe for concurrent requests.
pub struct ChatClient {
    config: ChatClientConfig,
    http: reqwest::blocking::Client,
}

impl ChatClient {
    pub fn new(config: ChatClientConfig) -> Result<Self, WireError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| WireError::Request(e.to_string()))?;
        Ok(ChatClient { config, http })
    }

    pub fn model(&self) -> &str {
        &self.config.model
    }

    /// One request, one answer; retries live in the engine's phase loop.
    pub fn complete(&self, messages: Vec<ChatMessage>) -> Result<String, WireError> {
        let key = self
            .config
            .api_key
            .clone()
            .ok_or(WireError::MissingApiKey)?;
        let request = ChatCompletionRequest {
            model: self.config.model.clone(),
            messages,
            temperature: 0.0,
        };
        let url = format!(
            "{}/v1/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let response = self
            .http
            .post(url)
            .bearer_auth(key)
            .json(&request)
            .send()
            .map_err(|e| WireError::Request(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(WireError::Status(status.as_u16()));
        }
        let parsed: ChatCompletionResponse = response
            .json()
            .map_err(|e| WireError::Malformed(e.to_string()))?;
        parsed
            .choices
            .first()
            .map(|choice| choice.message.content.clone())
            .ok_or_else(|| WireError::Malformed("no choices in response".to_string()))
    }
}
