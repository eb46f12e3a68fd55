//! Scored text generation behind one contract.
//!
//! The search engine and the domains only ever talk to [`TextBackend`]. Two
//! implementations ship with the crate: a deterministic, script-driven mock
//! for tests ([`mock::MockBackend`]) and an HTTP client for completion
//! endpoints ([`http::HttpBackend`]). [`cache::CachedBackend`] wraps either
//! with request-level caching and exact call accounting.

pub mod cache;
pub mod http;
pub mod mock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single generation request.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    /// Generation is truncated immediately before the first stop sequence.
    pub stop_sequences: Vec<String>,
    pub n_samples: usize,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: 256,
            temperature: 0.8,
            stop_sequences: vec!["\n".to_string()],
            n_samples: 1,
            seed: None,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_stop(mut self, stops: &[&str]) -> Self {
        self.stop_sequences = stops.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Generated text with token-level log probabilities.
///
/// `total_logprob` is always the sum of the per-token values and is never
/// positive.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoredText {
    pub text: String,
    pub token_logprobs: Vec<(String, f64)>,
    pub total_logprob: f64,
}

impl ScoredText {
    pub fn new(text: impl Into<String>, token_logprobs: Vec<(String, f64)>) -> Self {
        let total = token_logprobs.iter().map(|(_, lp)| lp).sum();
        Self {
            text: text.into(),
            token_logprobs,
            total_logprob: total,
        }
    }

    /// Uniform per-token logprob over whitespace tokens of `text`.
    pub fn with_uniform_logprob(text: impl Into<String>, per_token: f64) -> Self {
        let text = text.into();
        let tokens: Vec<(String, f64)> = text
            .split_whitespace()
            .map(|t| (t.to_string(), per_token))
            .collect();
        Self::new(text, tokens)
    }
}

/// Probability of one candidate as the next token.
///
/// `missing` marks candidates absent from the backend's (top-k) distribution;
/// their probability is reported as 0.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TokenProb {
    pub token: String,
    pub probability: f64,
    pub missing: bool,
}

/// The scored text generation contract.
///
/// Implementations must be reentrant: the engine may call them from multiple
/// threads when independent searches run in parallel.
pub trait TextBackend: Send + Sync {
    /// Generate `n_samples` scored completions for the request.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<ScoredText>>;

    /// Total log probability of `continuation` given `prompt`.
    fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<f64>;

    /// Next-token probability for each candidate, unnormalized over the
    /// candidate set.
    fn next_token_probability(&self, prompt: &str, candidates: &[String]) -> Result<Vec<TokenProb>>;
}

/// Truncate `text` before the first occurrence of any stop sequence.
pub(crate) fn apply_stops(text: &str, stops: &[String]) -> String {
    let mut cut = text.len();
    for stop in stops {
        if stop.is_empty() {
            continue;
        }
        if let Some(pos) = text.find(stop.as_str()) {
            cut = cut.min(pos);
        }
    }
    text[..cut].to_string()
}

pub(crate) fn validate_request(request: &GenerationRequest) -> Result<()> {
    if request.n_samples == 0 {
        return Err(Error::Config("n_samples must be >= 1".into()));
    }
    if request.max_tokens == 0 {
        return Err(Error::Config("max_tokens must be >= 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scored_text_totals_tokens() {
        let s = ScoredText::new(
            "a b",
            vec![("a".into(), -0.5), ("b".into(), -1.5)],
        );
        assert_eq!(s.total_logprob, -2.0);
    }

    #[test]
    fn stops_truncate_before_match() {
        assert_eq!(apply_stops("one\ntwo", &["\n".to_string()]), "one");
        assert_eq!(apply_stops("plain", &["\n".to_string()]), "plain");
    }
}
