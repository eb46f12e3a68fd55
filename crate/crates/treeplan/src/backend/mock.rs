//! Deterministic, script-driven mock backend.
//!
//! A [`MockScript`] is an ordered list of rules. The first rule whose matcher
//! accepts the prompt wins. Scripts load from a JSON fixture file or are
//! built programmatically with [`MockScript::builder`]. Under a fixed seed the
//! mock is a pure function of (script, seed, request), so two runs produce
//! byte-identical output regardless of thread interleaving.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_stops, validate_request, GenerationRequest, ScoredText, TextBackend, TokenProb};
use crate::error::{Error, Result};

/// Prompt matcher: exact suffix or a `*`-wildcard glob (no regex).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Suffix(String),
    Glob(String),
}

impl Matcher {
    pub fn suffix(s: impl Into<String>) -> Self {
        Matcher::Suffix(s.into())
    }

    pub fn glob(s: impl Into<String>) -> Self {
        Matcher::Glob(s.into())
    }

    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Suffix(s) => prompt.ends_with(s.as_str()),
            Matcher::Glob(g) => glob_match(g, prompt),
        }
    }
}

/// `*` matches any (possibly empty) substring; everything else is literal.
fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let mut pos = 0usize;
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            continue;
        }
        if i == 0 {
            if !text.starts_with(part) {
                return false;
            }
            pos = part.len();
        } else if i == parts.len() - 1 {
            return text.len() >= pos && text[pos..].ends_with(part);
        } else {
            match text[pos..].find(part) {
                Some(found) => pos += found + part.len(),
                None => return false,
            }
        }
    }
    // Pattern ends with '*'.
    true
}

/// One canned response; token logprobs are optional and synthesized from the
/// script's token table (or a -1.0 default) when absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<(String, f64)>>,
}

impl From<&str> for MockResponse {
    fn from(text: &str) -> Self {
        Self {
            text: text.to_string(),
            token_logprobs: None,
        }
    }
}

/// Generation rule: responses are cycled per sample index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenRule {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub responses: Vec<MockResponse>,
}

/// Continuation-scoring rule with exact-match sentence scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRule {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    /// Map continuation text -> logprob. Interpreted per token when
    /// `per_token` is set, as a total otherwise.
    pub scores: BTreeMap<String, f64>,
    #[serde(default)]
    pub per_token: bool,
}

/// Next-token distribution rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NextTokenRule {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub probs: BTreeMap<String, f64>,
}

/// Token-level logprob table backing score_continuation when no sentence
/// rule matches. Summing per-token values makes scoring additive over
/// concatenation by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenTable {
    pub default: f64,
    #[serde(default)]
    pub tokens: BTreeMap<String, f64>,
}

impl TokenTable {
    pub fn uniform(default: f64) -> Self {
        Self {
            default,
            tokens: BTreeMap::new(),
        }
    }

    fn score(&self, continuation: &str) -> f64 {
        continuation
            .split_whitespace()
            .map(|t| *self.tokens.get(t).unwrap_or(&self.default))
            .sum()
    }
}

/// The full fixture: ordered rules plus optional fallbacks.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<GenRule>,
    #[serde(default)]
    pub score_rules: Vec<ScoreRule>,
    #[serde(default)]
    pub next_token_rules: Vec<NextTokenRule>,
    /// Seeded uniform choice among these when no generation rule matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_scores: Option<TokenTable>,
}

impl MockScript {
    pub fn builder() -> MockScriptBuilder {
        MockScriptBuilder::default()
    }

    /// Load a script from a JSON fixture file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let script: MockScript = serde_json::from_str(&text)?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<()> {
        for rule in &self.next_token_rules {
            let sum: f64 = rule.probs.values().sum();
            if sum > 1.0 + 1e-9 {
                return Err(Error::Config(format!(
                    "next-token rule probabilities sum to {sum} > 1"
                )));
            }
            if rule.probs.values().any(|p| *p < 0.0) {
                return Err(Error::Config("negative next-token probability".into()));
            }
        }
        Ok(())
    }
}

#[derive(Default)]
pub struct MockScriptBuilder {
    script: MockScript,
}

impl MockScriptBuilder {
    pub fn rule(mut self, matcher: Matcher, responses: Vec<MockResponse>) -> Self {
        self.script.rules.push(GenRule { matcher, responses });
        self
    }

    pub fn respond(self, matcher: Matcher, texts: &[&str]) -> Self {
        self.rule(matcher, texts.iter().map(|t| MockResponse::from(*t)).collect())
    }

    pub fn score(mut self, matcher: Matcher, scores: &[(&str, f64)], per_token: bool) -> Self {
        self.script.score_rules.push(ScoreRule {
            matcher,
            scores: scores.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            per_token,
        });
        self
    }

    pub fn next_token(mut self, matcher: Matcher, probs: &[(&str, f64)]) -> Self {
        self.script.next_token_rules.push(NextTokenRule {
            matcher,
            probs: probs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
        self
    }

    pub fn fallback(mut self, alternatives: &[&str]) -> Self {
        self.script.fallback = Some(alternatives.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn token_scores(mut self, table: TokenTable) -> Self {
        self.script.token_scores = Some(table);
        self
    }

    pub fn build(self) -> MockScript {
        self.script
    }
}

/// Script-driven [`TextBackend`]. Stateless; all sampling is derived from the
/// (seed, prompt, sample index) hash so calls commute across threads.
pub struct MockBackend {
    script: MockScript,
    seed: u64,
}

impl MockBackend {
    pub fn new(script: MockScript, seed: u64) -> Self {
        Self { script, seed }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    fn excerpt(prompt: &str) -> String {
        let tail: String = prompt.chars().rev().take(120).collect();
        tail.chars().rev().collect()
    }

    fn derive_rng(&self, request_seed: Option<u64>, prompt: &str, index: usize) -> ChaCha8Rng {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.seed.hash(&mut hasher);
        request_seed.hash(&mut hasher);
        prompt.hash(&mut hasher);
        index.hash(&mut hasher);
        ChaCha8Rng::seed_from_u64(hasher.finish())
    }

    fn synthesize(&self, response: &MockResponse, stops: &[String]) -> ScoredText {
        let text = apply_stops(&response.text, stops);
        match &response.token_logprobs {
            Some(tokens) => {
                // Keep only tokens that survived stop truncation.
                let mut kept = Vec::new();
                let mut consumed = 0usize;
                for (tok, lp) in tokens {
                    if let Some(found) = text[consumed..].find(tok.as_str()) {
                        consumed += found + tok.len();
                        kept.push((tok.clone(), *lp));
                    } else {
                        break;
                    }
                }
                ScoredText::new(text, kept)
            }
            None => {
                let per_token = self
                    .script
                    .token_scores
                    .as_ref()
                    .map(|t| t.default)
                    .unwrap_or(-1.0);
                let tokens = text
                    .split_whitespace()
                    .map(|tok| {
                        let lp = self
                            .script
                            .token_scores
                            .as_ref()
                            .and_then(|t| t.tokens.get(tok).copied())
                            .unwrap_or(per_token);
                        (tok.to_string(), lp)
                    })
                    .collect();
                ScoredText::new(text, tokens)
            }
        }
    }
}

impl TextBackend for MockBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<ScoredText>> {
        validate_request(request)?;
        if let Some(rule) = self
            .script
            .rules
            .iter()
            .find(|r| r.matcher.matches(&request.prompt))
        {
            let out = (0..request.n_samples)
                .map(|i| self.synthesize(&rule.responses[i % rule.responses.len()], &request.stop_sequences))
                .collect();
            return Ok(out);
        }
        if let Some(alternatives) = &self.script.fallback {
            let out = (0..request.n_samples)
                .map(|i| {
                    let mut rng = self.derive_rng(request.seed, &request.prompt, i);
                    let pick = rng.gen_range(0..alternatives.len());
                    self.synthesize(
                        &MockResponse::from(alternatives[pick].as_str()),
                        &request.stop_sequences,
                    )
                })
                .collect();
            return Ok(out);
        }
        Err(Error::ScriptMiss(format!(
            "no generation rule matches prompt ending {:?}",
            Self::excerpt(&request.prompt)
        )))
    }

    fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<f64> {
        if continuation.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        if let Some(rule) = self
            .script
            .score_rules
            .iter()
            .find(|r| r.matcher.matches(prompt))
        {
            return match rule.scores.get(continuation) {
                Some(value) if rule.per_token => {
                    Ok(value * continuation.split_whitespace().count() as f64)
                }
                Some(value) => Ok(*value),
                None => Err(Error::ScriptMiss(format!(
                    "continuation {:?} not in score rule for prompt ending {:?}",
                    continuation,
                    Self::excerpt(prompt)
                ))),
            };
        }
        if let Some(table) = &self.script.token_scores {
            return Ok(table.score(continuation));
        }
        Err(Error::ScriptMiss(format!(
            "no score rule matches prompt ending {:?}",
            Self::excerpt(prompt)
        )))
    }

    fn next_token_probability(&self, prompt: &str, candidates: &[String]) -> Result<Vec<TokenProb>> {
        if candidates.is_empty() {
            return Err(Error::Config("candidates must be non-empty".into()));
        }
        let rule = self
            .script
            .next_token_rules
            .iter()
            .find(|r| r.matcher.matches(prompt))
            .ok_or_else(|| {
                Error::ScriptMiss(format!(
                    "no next-token rule matches prompt ending {:?}",
                    Self::excerpt(prompt)
                ))
            })?;
        Ok(candidates
            .iter()
            .map(|c| match rule.probs.get(c) {
                Some(p) => TokenProb {
                    token: c.clone(),
                    probability: *p,
                    missing: false,
                },
                None => TokenProb {
                    token: c.clone(),
                    probability: 0.0,
                    missing: true,
                },
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backend() -> MockBackend {
        let script = MockScript::builder()
            .respond(Matcher::suffix("[PLAN]\n"), &["pick up the orange block"])
            .respond(Matcher::glob("*two lines*"), &["first line\nsecond line"])
            .score(
                Matcher::suffix("score me"),
                &[("good action", -0.5), ("bad action", -4.0)],
                false,
            )
            .next_token(Matcher::suffix("useful?\nAnswer:"), &[("Yes", 0.8), ("No", 0.2)])
            .fallback(&["A", "B"])
            .token_scores(TokenTable::uniform(-0.5))
            .build();
        MockBackend::new(script, 7)
    }

    #[test]
    fn scripted_rule_is_deterministic() {
        let b = backend();
        let req = GenerationRequest::new("demo [PLAN]\n").with_samples(2);
        let a = b.generate(&req).unwrap();
        let c = b.generate(&req).unwrap();
        assert_eq!(a, c);
        assert_eq!(a[0].text, "pick up the orange block");
    }

    #[test]
    fn stop_sequences_truncate() {
        let b = backend();
        let req = GenerationRequest::new("about two lines please");
        let out = b.generate(&req).unwrap();
        assert_eq!(out[0].text, "first line");
    }

    #[test]
    fn fallback_is_seeded() {
        let b = backend();
        let req = GenerationRequest::new("unmatched").with_samples(3).with_seed(11);
        let a = b.generate(&req).unwrap();
        let c = b.generate(&req).unwrap();
        assert_eq!(a, c);
        for s in &a {
            assert!(s.text == "A" || s.text == "B");
        }
    }

    #[test]
    fn score_rule_and_miss() {
        let b = backend();
        assert_eq!(b.score_continuation("please score me", "good action").unwrap(), -0.5);
        let err = b.score_continuation("please score me", "unknown").unwrap_err();
        assert!(matches!(err, Error::ScriptMiss(_)));
    }

    #[test]
    fn token_table_is_additive() {
        let b = backend();
        // No score rule matches; token table applies: 4 tokens at -0.5 each.
        assert_eq!(b.score_continuation("other prompt", "a b c d").unwrap(), -2.0);
        let left = b.score_continuation("other prompt", "a b").unwrap();
        let right = b.score_continuation("other prompt", "c d").unwrap();
        assert_eq!(left + right, -2.0);
    }

    #[test]
    fn empty_continuation_is_an_error() {
        let b = backend();
        assert!(matches!(
            b.score_continuation("p", ""),
            Err(Error::EmptyContinuation)
        ));
    }

    #[test]
    fn next_token_probs_and_missing_flag() {
        let b = backend();
        let probs = b
            .next_token_probability(
                "is it useful?\nAnswer:",
                &["Yes".into(), "No".into(), "Maybe".into()],
            )
            .unwrap();
        assert_eq!(probs[0].probability, 0.8);
        assert_eq!(probs[1].probability, 0.2);
        assert!(probs[2].missing);
        assert_eq!(probs[2].probability, 0.0);
        let total: f64 = probs.iter().map(|p| p.probability).sum();
        assert!(total <= 1.0 + 1e-12);
    }

    #[test]
    fn glob_matching() {
        assert!(glob_match("*middle*", "has middle inside"));
        assert!(glob_match("start*", "start and more"));
        assert!(glob_match("*end", "at the end"));
        assert!(!glob_match("*absent*", "nothing here"));
        assert!(glob_match("a*b*c", "a x b y c"));
    }

    #[test]
    fn json_round_trip() {
        let script = backend().script.clone();
        let text = serde_json::to_string(&script).unwrap();
        let parsed: MockScript = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.rules.len(), script.rules.len());
        assert_eq!(parsed.score_rules.len(), script.score_rules.len());
    }
}
