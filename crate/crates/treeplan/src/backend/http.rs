//! HTTP client for OpenAI-style completion endpoints.
//!
//! Speaks the classic `/v1/completions` wire shape with `logprobs` and
//! `echo`. Continuations are scored with one echoed request when the server
//! supports it; otherwise a per-token fallback walks the continuation with
//! single-token requests and top-k lookup. Retries are bounded with
//! exponential backoff, after which the search sees `BackendUnavailable`.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{validate_request, GenerationRequest, ScoredText, TextBackend, TokenProb};
use crate::error::{Error, Result};

/// Connection and decoding settings. `api_key`/`base_url` fall back to the
/// `OPENAI_API_KEY` / `OPENAI_BASE_URL` environment variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_top_logprobs")]
    pub top_logprobs: usize,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    /// Base backoff in milliseconds, doubled per retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    /// Assume the endpoint supports `echo` + `logprobs` scoring.
    #[serde(default = "default_true")]
    pub supports_echo: bool,
}

fn default_top_logprobs() -> usize {
    5
}
fn default_retries() -> usize {
    3
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_timeout_s() -> u64 {
    120
}
fn default_true() -> bool {
    true
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            top_logprobs: default_top_logprobs(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            timeout_s: default_timeout_s(),
            supports_echo: true,
        }
    }

    pub fn from_env(model: impl Into<String>) -> Result<Self> {
        let base_url = std::env::var("OPENAI_BASE_URL")
            .map_err(|_| Error::Config("OPENAI_BASE_URL is not set".into()))?;
        let mut cfg = Self::new(base_url, model);
        cfg.api_key = std::env::var("OPENAI_API_KEY").ok();
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: usize,
    temperature: f64,
    n: usize,
    logprobs: usize,
    echo: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    text: String,
    #[serde(default)]
    logprobs: Option<LogprobData>,
}

#[derive(Debug, Deserialize, Default)]
struct LogprobData {
    #[serde(default)]
    tokens: Vec<String>,
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    text_offset: Vec<usize>,
    #[serde(default)]
    top_logprobs: Vec<Option<BTreeMap<String, f64>>>,
}

/// OpenAI-compatible completions backend.
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn endpoint(&self) -> String {
        format!("{}/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn post(&self, body: &CompletionBody) -> Result<CompletionResponse> {
        let mut backoff = self.config.backoff_ms;
        let mut last_error = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(backoff));
                backoff = backoff.saturating_mul(2);
            }
            let mut request = self.client.post(self.endpoint()).json(body);
            if let Some(key) = &self.config.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.as_u16() == 429 {
                        last_error = Some(Error::QuotaExceeded);
                        continue;
                    }
                    if status.is_server_error() {
                        last_error =
                            Some(Error::BackendUnavailable(format!("server error {status}")));
                        continue;
                    }
                    if !status.is_success() {
                        let text = response.text().unwrap_or_default();
                        return Err(Error::BackendUnavailable(format!(
                            "status {status}: {text}"
                        )));
                    }
                    return response
                        .json::<CompletionResponse>()
                        .map_err(|e| Error::BackendUnavailable(format!("bad response: {e}")));
                }
                Err(e) => last_error = Some(Error::BackendUnavailable(e.to_string())),
            }
        }
        Err(last_error.unwrap_or_else(|| Error::BackendUnavailable("unknown".into())))
    }

    fn score_with_echo(&self, prompt: &str, continuation: &str) -> Result<f64> {
        let full = format!("{prompt}{continuation}");
        let body = CompletionBody {
            model: &self.config.model,
            prompt: &full,
            max_tokens: 0,
            temperature: 0.0,
            n: 1,
            logprobs: self.config.top_logprobs,
            echo: true,
            stop: None,
            seed: None,
        };
        let response = self.post(&body)?;
        let choice = response
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::BackendUnavailable("no choices".into()))?;
        let data = choice.logprobs.ok_or(Error::ScoringUnsupported)?;
        if data.text_offset.len() != data.token_logprobs.len() {
            return Err(Error::ScoringUnsupported);
        }
        let boundary = prompt.len();
        let mut total = 0.0;
        for (offset, lp) in data.text_offset.iter().zip(&data.token_logprobs) {
            if *offset >= boundary {
                total += lp.unwrap_or(0.0);
            }
        }
        Ok(total)
    }

    /// Fallback: walk the continuation one token at a time, reading the
    /// next token's logprob from the top-k list. Fails with
    /// `ScoringUnsupported` when the realized token is outside top-k.
    fn score_stepwise(&self, prompt: &str, continuation: &str) -> Result<f64> {
        let mut context = prompt.to_string();
        let mut remaining = continuation;
        let mut total = 0.0;
        while !remaining.is_empty() {
            let body = CompletionBody {
                model: &self.config.model,
                prompt: &context,
                max_tokens: 1,
                temperature: 0.0,
                n: 1,
                logprobs: self.config.top_logprobs,
                echo: false,
                stop: None,
                seed: None,
            };
            let response = self.post(&body)?;
            let choice = response
                .choices
                .into_iter()
                .next()
                .ok_or_else(|| Error::BackendUnavailable("no choices".into()))?;
            let data = choice.logprobs.ok_or(Error::ScoringUnsupported)?;
            let top = data
                .top_logprobs
                .first()
                .and_then(|t| t.as_ref())
                .ok_or(Error::ScoringUnsupported)?;
            // Longest top-k token that prefixes what is left.
            let mut best: Option<(&str, f64)> = None;
            for (tok, lp) in top {
                if remaining.starts_with(tok.as_str())
                    && best.map_or(true, |(b, _)| tok.len() > b.len())
                {
                    best = Some((tok.as_str(), *lp));
                }
            }
            let (tok, lp) = best.ok_or(Error::ScoringUnsupported)?;
            total += lp;
            context.push_str(tok);
            remaining = &remaining[tok.len()..];
        }
        Ok(total)
    }
}

impl TextBackend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<ScoredText>> {
        validate_request(request)?;
        let body = CompletionBody {
            model: &self.config.model,
            prompt: &request.prompt,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            n: request.n_samples,
            logprobs: self.config.top_logprobs,
            echo: false,
            stop: if request.stop_sequences.is_empty() {
                None
            } else {
                Some(&request.stop_sequences)
            },
            seed: request.seed,
        };
        let response = self.post(&body)?;
        if response.choices.is_empty() {
            return Err(Error::BackendUnavailable("no choices returned".into()));
        }
        Ok(response
            .choices
            .into_iter()
            .map(|choice| {
                let tokens = choice
                    .logprobs
                    .map(|d| {
                        d.tokens
                            .into_iter()
                            .zip(d.token_logprobs)
                            .map(|(t, lp)| (t, lp.unwrap_or(0.0)))
                            .collect::<Vec<_>>()
                    })
                    .unwrap_or_default();
                // Stop handling identical to the mock: the server already cut
                // the text; re-apply locally in case it did not.
                let text = super::apply_stops(&choice.text, &request.stop_sequences);
                ScoredText::new(text, tokens)
            })
            .collect())
    }

    fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<f64> {
        if continuation.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        if self.config.supports_echo {
            match self.score_with_echo(prompt, continuation) {
                Err(Error::ScoringUnsupported) => {}
                other => return other,
            }
        }
        self.score_stepwise(prompt, continuation)
    }

    fn next_token_probability(&self, prompt: &str, candidates: &[String]) -> Result<Vec<TokenProb>> {
        if candidates.is_empty() {
            return Err(Error::Config("candidates must be non-empty".into()));
        }
        let body = CompletionBody {
            model: &self.config.model,
            prompt,
            max_tokens: 1,
            temperature: 0.0,
            n: 1,
            logprobs: self.config.top_logprobs,
            echo: false,
            stop: None,
            seed: None,
        };
        let response = self.post(&body)?;
        let top = response
            .choices
            .first()
            .and_then(|c| c.logprobs.as_ref())
            .and_then(|d| d.top_logprobs.first())
            .and_then(|t| t.clone())
            .unwrap_or_default();
        Ok(candidates
            .iter()
            .map(|cand| {
                // Accept exact and leading-space tokenizations.
                let found = top
                    .get(cand)
                    .or_else(|| top.get(&format!(" {cand}")))
                    .copied();
                match found {
                    Some(lp) => TokenProb {
                        token: cand.clone(),
                        probability: lp.exp(),
                        missing: false,
                    },
                    None => TokenProb {
                        token: cand.clone(),
                        probability: 0.0,
                        missing: true,
                    },
                }
            })
            .collect())
    }
}
