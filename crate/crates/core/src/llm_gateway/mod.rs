//! Completion interface shared by the live HTTP backend, transcript replay
//! and scripted stubs.

mod live;
mod offline;
mod transcript;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use live::{HttpReply, HttpTransport, LiveConfig, LiveGateway, ReqwestTransport};
pub use offline::{Recorder, ReplayGateway, StubGateway};
pub use transcript::{Transcript, TranscriptEntry, TranscriptMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// What a call is for. Not part of the request key; used for logs and
/// call accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    SeedGenerate,
    SeedRepair,
    BranchIntention,
    FunctionIntention,
    TestGenerate,
    TestRepair,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<Message>,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub purpose: Purpose,
}

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<Message>, purpose: Purpose) -> Result<Self, GatewayError> {
        if !messages.iter().any(|m| m.role == Role::User) {
            return Err(GatewayError::InvalidRequest("at least one user message is required".into()));
        }
        Ok(Self { messages, model_id: model_id.into(), temperature: 0.0, max_tokens: 2048, purpose })
    }

    /// One system message followed by one user message.
    pub fn prompt(model_id: &str, system: &str, user: &str, purpose: Purpose) -> Self {
        Self::new(model_id, vec![Message::system(system), Message::user(user)], purpose)
            .expect("a user message is present")
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens.max(1);
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature.max(0.0);
        self
    }

    /// Hex SHA-256 over the model id and messages. Temperature, token limit
    /// and purpose are left out.
    pub fn request_key(&self) -> String {
        #[derive(Serialize)]
        struct Keyed<'a> {
            model_id: &'a str,
            messages: &'a [Message],
        }
        let bytes = serde_json::to_vec(&Keyed { model_id: &self.model_id, messages: &self.messages })
            .expect("plain strings always serialize");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn user_text(&self) -> String {
        self.messages.iter().filter(|m| m.role == Role::User).map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u32,
    pub completion: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: TokenUsage,
}

impl CompletionResponse {
    /// A normal reply; empty content is reported as an error finish.
    pub fn text(content: impl Into<String>) -> Self {
        let content = content.into();
        let finish_reason = if content.is_empty() { FinishReason::Error } else { FinishReason::Stop };
        let usage = TokenUsage { prompt: 0, completion: estimate_tokens(&content) as u32 };
        Self { content, finish_reason, usage }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("request exceeds the model context: {0}")]
    TokenOverflow(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded response for request {0}")]
    TranscriptMiss(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript persistence failed: {0}")]
    Persistence(String),
}

pub trait Gateway: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError>;
}

impl<G: Gateway + ?Sized> Gateway for std::sync::Arc<G> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(req)
    }
}

impl<G: Gateway + ?Sized> Gateway for &G {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(req)
    }
}

/// Rough token count used for prompt budgeting: one token per four chars.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_key_ignores_temperature_and_purpose() {
        let a = CompletionRequest::prompt("m", "sys", "hello", Purpose::SeedGenerate);
        let b = a.clone().with_temperature(0.7).with_max_tokens(10);
        let mut c = a.clone();
        c.purpose = Purpose::TestRepair;
        assert_eq!(a.request_key(), b.request_key());
        assert_eq!(a.request_key(), c.request_key());
        assert_eq!(a.request_key().len(), 64);
        let other_model = CompletionRequest::prompt("n", "sys", "hello", Purpose::SeedGenerate);
        assert_ne!(a.request_key(), other_model.request_key());
        let other_text = CompletionRequest::prompt("m", "sys", "hello!", Purpose::SeedGenerate);
        assert_ne!(a.request_key(), other_text.request_key());
    }

    #[test]
    fn request_needs_a_user_message() {
        assert!(CompletionRequest::new("m", vec![Message::system("x")], Purpose::Other).is_err());
    }

    #[test]
    fn empty_text_is_error_finish() {
        assert_eq!(CompletionResponse::text("").finish_reason, FinishReason::Error);
        assert_eq!(CompletionResponse::text("ok").finish_reason, FinishReason::Stop);
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }
}
