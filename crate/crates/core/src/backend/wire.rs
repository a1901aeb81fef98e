//! JSON bodies exchanged with generation, echo-scoring and embedding endpoints.

use serde::{Deserialize, Serialize};

use crate::drafting::TokenLogprob;

/// Body of `POST` to a generation endpoint. With `echo` set and `max_tokens`
/// zero the endpoint scores the prompt itself instead of generating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub logprobs: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub echo: bool,
}

impl GenerateRequest {
    /// Greedy decoding with per-token logprobs.
    pub fn greedy(prompt: impl Into<String>, max_tokens: u32) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens,
            temperature: 0.0,
            logprobs: true,
            echo: false,
        }
    }

    pub fn echo(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: 0,
            temperature: 0.0,
            logprobs: true,
            echo: true,
        }
    }
}

/// Generated (or echoed) text with per-token logprobs. Token offsets are byte
/// offsets into `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<TokenLogprob>,
}

impl GenerateResponse {
    /// Checks token offsets and logprob values against the text.
    pub fn check(&self) -> Result<(), String> {
        let mut prev_end = 0usize;
        for (i, t) in self.tokens.iter().enumerate() {
            if !t.logprob.is_finite() || t.logprob > 0.0 {
                return Err(format!("token {i} has invalid logprob {}", t.logprob));
            }
            if t.char_start >= t.char_end {
                return Err(format!("token {i} has empty range"));
            }
            if t.char_start < prev_end {
                return Err(format!("token {i} overlaps its predecessor"));
            }
            if t.char_end > self.text.len() {
                return Err(format!("token {i} extends past the end of the text"));
            }
            prev_end = t.char_end;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub instruction: String,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
}
