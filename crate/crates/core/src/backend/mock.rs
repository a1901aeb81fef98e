//! Deterministic stand-in for drafter, verifier and embedding models.
//!
//! Responses are a pure function of request content:
//!
//! * Generation looks the prompt up by [`prompt_hash`] in the script. Unscripted
//!   prompts fall back to `"## Rationale: L. ## Response: L."` where `L` is the
//!   last non-blank prompt line, every token scored `-1.0`.
//! * Echo scoring splits the prompt on whitespace and scores each token with
//!   [`echo_rule`] unless the script overrides that prompt.
//! * Embedding maps each input through [`hash_embedding`] unless the script
//!   pins a vector for it. The instruction is logged but does not affect the
//!   vector.

use std::collections::BTreeMap;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::wire::{EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse};
use crate::drafting::TokenLogprob;

pub const FALLBACK_LOGPROB: f64 = -1.0;
pub const DEFAULT_EMBEDDING_DIMS: usize = 16;

/// Lowercase hex SHA-256 of the prompt bytes; the key of every scripted table.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `-(1 + (byte sum mod 7)) / 10`
pub fn echo_rule(token: &[u8]) -> f64 {
    let sum: u64 = token.iter().map(|&b| u64::from(b)).sum();
    -((1 + sum % 7) as f64) / 10.0
}

/// Byte ranges of the maximal non-whitespace runs of `text`.
pub fn whitespace_tokens(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

/// Component `j` is built from the first eight bytes (little endian) of
/// SHA-256(input ‖ j as u32 LE): the top 53 bits scaled into `[-1, 1)`.
/// The vector is returned unnormalized.
pub fn hash_embedding(input: &str, dims: usize) -> Vec<f64> {
    (0..dims as u32)
        .map(|j| {
            let mut h = Sha256::new();
            h.update(input.as_bytes());
            h.update(j.to_le_bytes());
            let d = h.finalize();
            let mut head = [0u8; 8];
            head.copy_from_slice(&d[..8]);
            let x = u64::from_le_bytes(head) >> 11;
            (x as f64) * 2f64.powi(-53) * 2.0 - 1.0
        })
        .collect()
}

fn tokens_with(text: &str, mut score: impl FnMut(usize, &str) -> f64) -> Vec<TokenLogprob> {
    whitespace_tokens(text)
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| TokenLogprob {
            token_text: text[s..e].to_string(),
            logprob: score(i, &text[s..e]),
            char_start: s,
            char_end: e,
        })
        .collect()
}

/// How a scripted text is scored. At most one field should be set; with none
/// set the text is scored by [`echo_rule`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenScript {
    /// Explicit tokens with offsets into the text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLogprob>>,
    /// One logprob per whitespace token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    /// The same logprob for every whitespace token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_logprob: Option<f64>,
}

impl TokenScript {
    pub fn uniform(logprob: f64) -> Self {
        Self {
            uniform_logprob: Some(logprob),
            ..Self::default()
        }
    }

    pub fn per_token(logprobs: Vec<f64>) -> Self {
        Self {
            logprobs: Some(logprobs),
            ..Self::default()
        }
    }

    fn check(&self, text: &str) -> Result<(), String> {
        let set = [
            self.tokens.is_some(),
            self.logprobs.is_some(),
            self.uniform_logprob.is_some(),
        ]
        .iter()
        .filter(|x| **x)
        .count();
        if set > 1 {
            return Err("set at most one of tokens, logprobs, uniform_logprob".into());
        }
        let bad = |lp: f64| !lp.is_finite() || lp > 0.0;
        if let Some(lp) = self.uniform_logprob {
            if bad(lp) {
                return Err(format!("invalid logprob {lp}"));
            }
        }
        if let Some(lps) = &self.logprobs {
            let n = whitespace_tokens(text).len();
            if lps.len() != n {
                return Err(format!("{} logprobs for {n} whitespace tokens", lps.len()));
            }
            if let Some(lp) = lps.iter().find(|lp| bad(**lp)) {
                return Err(format!("invalid logprob {lp}"));
            }
        }
        if let Some(tokens) = &self.tokens {
            let resp = GenerateResponse {
                text: text.to_string(),
                tokens: tokens.clone(),
            };
            resp.check()?;
        }
        Ok(())
    }

    fn resolve(&self, text: &str) -> Vec<TokenLogprob> {
        if let Some(tokens) = &self.tokens {
            return tokens.clone();
        }
        if let Some(lps) = &self.logprobs {
            return tokens_with(text, |i, tok| {
                lps.get(i).copied().unwrap_or_else(|| echo_rule(tok.as_bytes()))
            });
        }
        if let Some(lp) = self.uniform_logprob {
            return tokens_with(text, |_, _| lp);
        }
        tokens_with(text, |_, tok| echo_rule(tok.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCompletion {
    pub text: String,
    #[serde(flatten)]
    pub scoring: TokenScript,
}

fn default_dims() -> usize {
    DEFAULT_EMBEDDING_DIMS
}

/// Scripted behaviour of a mock endpoint. All tables are keyed by
/// [`prompt_hash`] of the prompt (or of the embedding input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub completions: BTreeMap<String, ScriptedCompletion>,
    #[serde(default)]
    pub echoes: BTreeMap<String, TokenScript>,
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub delay_ms: u64,
    #[serde(default = "default_dims")]
    pub embedding_dims: usize,
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            completions: BTreeMap::new(),
            echoes: BTreeMap::new(),
            embeddings: BTreeMap::new(),
            delay_ms: 0,
            embedding_dims: DEFAULT_EMBEDDING_DIMS,
        }
    }
}

impl MockScript {
    pub fn with_delay(mut self, delay_ms: u64) -> Self {
        self.delay_ms = delay_ms;
        self
    }

    pub fn add_completion(&mut self, prompt: &str, text: impl Into<String>, scoring: TokenScript) {
        self.completions.insert(
            prompt_hash(prompt),
            ScriptedCompletion {
                text: text.into(),
                scoring,
            },
        );
    }

    pub fn add_echo(&mut self, prompt: &str, scoring: TokenScript) {
        self.echoes.insert(prompt_hash(prompt), scoring);
    }

    pub fn add_embedding(&mut self, input: &str, vector: Vec<f64>) {
        self.embeddings.insert(prompt_hash(input), vector);
    }

    /// Merges another script's tables into this one; entries in `other` win.
    pub fn merge(&mut self, other: MockScript) {
        self.completions.extend(other.completions);
        self.echoes.extend(other.echoes);
        self.embeddings.extend(other.embeddings);
    }

    /// Echo scores cannot be checked against a prompt that is only known by
    /// hash, so explicit echo token lists are validated when served.
    pub fn validate(&self) -> Result<(), String> {
        if self.embedding_dims == 0 {
            return Err("embedding_dims must be ≥ 1".into());
        }
        for (hash, c) in &self.completions {
            c.scoring
                .check(&c.text)
                .map_err(|e| format!("completion {hash}: {e}"))?;
        }
        for (hash, e) in &self.echoes {
            let n = [
                e.tokens.is_some(),
                e.logprobs.is_some(),
                e.uniform_logprob.is_some(),
            ]
            .iter()
            .filter(|x| **x)
            .count();
            if n > 1 {
                return Err(format!("echo {hash}: set at most one scoring field"));
            }
        }
        for (hash, v) in &self.embeddings {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(format!("embedding {hash}: values must be finite and non-empty"));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self, String> {
        let script: MockScript = serde_json::from_str(s).map_err(|e| e.to_string())?;
        script.validate()?;
        Ok(script)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Generate,
    Echo,
    Embed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestLogEntry {
    pub seq: u64,
    pub kind: RequestKind,
    pub prompt_hash: String,
    /// Prompt text, or for embeddings the instruction followed by each input
    /// on its own line.
    pub content: String,
}

/// Mock model state shared by every connection of a mock server.
#[derive(Debug, Default)]
pub struct MockLm {
    script: RwLock<MockScript>,
    log: Mutex<Vec<RequestLogEntry>>,
}

impl MockLm {
    pub fn new(script: MockScript) -> Self {
        Self {
            script: RwLock::new(script),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn replace_script(&self, script: MockScript) {
        *self.script.write().expect("script lock poisoned") = script;
    }

    pub fn delay_ms(&self) -> u64 {
        self.script.read().expect("script lock poisoned").delay_ms
    }

    pub fn request_log(&self) -> Vec<RequestLogEntry> {
        self.log.lock().expect("log lock poisoned").clone()
    }

    fn record(&self, kind: RequestKind, content: String) {
        let mut log = self.log.lock().expect("log lock poisoned");
        let seq = log.len() as u64;
        log.push(RequestLogEntry {
            seq,
            kind,
            prompt_hash: prompt_hash(&content),
            content,
        });
    }

    /// Dispatches on the `echo` flag.
    pub fn handle_generate(&self, req: &GenerateRequest) -> GenerateResponse {
        if req.echo {
            self.echo(&req.prompt)
        } else {
            self.generate(&req.prompt)
        }
    }

    pub fn generate(&self, prompt: &str) -> GenerateResponse {
        self.record(RequestKind::Generate, prompt.to_string());
        let script = self.script.read().expect("script lock poisoned");
        match script.completions.get(&prompt_hash(prompt)) {
            Some(c) => GenerateResponse {
                text: c.text.clone(),
                tokens: c.scoring.resolve(&c.text),
            },
            None => {
                let last = prompt
                    .lines()
                    .rev()
                    .map(str::trim)
                    .find(|l| !l.is_empty())
                    .unwrap_or("");
                let text = format!("## Rationale: {last}. ## Response: {last}.");
                let tokens = tokens_with(&text, |_, _| FALLBACK_LOGPROB);
                GenerateResponse { text, tokens }
            }
        }
    }

    pub fn echo(&self, prompt: &str) -> GenerateResponse {
        self.record(RequestKind::Echo, prompt.to_string());
        let script = self.script.read().expect("script lock poisoned");
        let tokens = match script.echoes.get(&prompt_hash(prompt)) {
            Some(s) => s.resolve(prompt),
            None => tokens_with(prompt, |_, tok| echo_rule(tok.as_bytes())),
        };
        GenerateResponse {
            text: prompt.to_string(),
            tokens,
        }
    }

    pub fn embed(&self, req: &EmbedRequest) -> EmbedResponse {
        let mut content = req.instruction.clone();
        for input in &req.inputs {
            content.push('\n');
            content.push_str(input);
        }
        self.record(RequestKind::Embed, content);
        let script = self.script.read().expect("script lock poisoned");
        let embeddings = req
            .inputs
            .iter()
            .map(|input| {
                script
                    .embeddings
                    .get(&prompt_hash(input))
                    .cloned()
                    .unwrap_or_else(|| hash_embedding(input, script.embedding_dims))
            })
            .collect();
        EmbedResponse { embeddings }
    }
}
