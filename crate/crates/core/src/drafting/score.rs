//! Log-domain sequence scores over token logprobs.

use serde::{Deserialize, Serialize};

/// One token with its natural-log probability. Offsets are bytes into the
/// text the token was produced for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    #[serde(rename = "text")]
    pub token_text: String,
    pub logprob: f64,
    #[serde(rename = "start")]
    pub char_start: usize,
    #[serde(rename = "end")]
    pub char_end: usize,
}

/// Half-open byte range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ByteSpan {
    pub start: usize,
    pub end: usize,
}

impl ByteSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    /// True when a token range shares at least one byte with the span.
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        !self.is_empty() && start < self.end && self.start < end
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

/// Tokens of `tokens` that overlap `span`.
pub fn tokens_in_span<'a>(
    tokens: &'a [TokenLogprob],
    span: ByteSpan,
) -> impl Iterator<Item = &'a TokenLogprob> + 'a {
    tokens
        .iter()
        .filter(move |t| span.overlaps(t.char_start, t.char_end))
}

/// Log probability of the tokens overlapping `span`: their summed logprobs,
/// or the mean when `normalize` is set. An empty span scores 0.
pub fn sequence_logprob(tokens: &[TokenLogprob], span: ByteSpan, normalize: bool) -> f64 {
    let (sum, count) = tokens_in_span(tokens, span)
        .fold((0.0, 0usize), |(s, n), t| (s + t.logprob, n + 1));
    if normalize && count > 0 {
        sum / count as f64
    } else {
        sum
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn logsumexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}
