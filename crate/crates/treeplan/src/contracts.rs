//! The three pluggable roles the search engine is parameterized over, plus
//! reward combinators shared by all domains.
//!
//! A domain supplies a world model (state transitions + terminal test), a
//! policy (candidate action proposals) and a reward function (a cheap
//! `fast_reward` used during roll-outs and as a prior for unvisited edges,
//! and a `full_reward` computed on first traversal of an edge). All three
//! must be safe for concurrent invocation.

use std::sync::Arc;

use crate::backend::TextBackend;
use crate::error::{Error, Result};

/// Per-step context handed to the contracts; carries the tree depth so
/// prompt construction can adapt (demonstration truncation).
#[derive(Debug, Clone, Copy, Default)]
pub struct StepContext {
    pub depth: usize,
}

impl StepContext {
    pub fn at_depth(depth: usize) -> Self {
        Self { depth }
    }
}

/// An action candidate with the proposer's log probability (<= 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ProposedAction<A> {
    pub action: A,
    pub log_prob: f64,
}

impl<A> ProposedAction<A> {
    pub fn new(action: A, log_prob: f64) -> Self {
        Self { action, log_prob }
    }
}

/// Predicts the next reasoning state and decides terminality.
pub trait WorldModel<S, A>: Send + Sync {
    fn next_state(&self, state: &S, action: &A, ctx: &StepContext) -> Result<S>;

    /// Must return true at and beyond the configured depth limit; the engine
    /// additionally enforces the limit itself.
    fn is_terminal(&self, state: &S, depth: usize) -> bool;
}

/// Proposes up to `d` distinct candidate actions for a state.
pub trait Policy<S, A>: Send + Sync {
    fn propose_actions(&self, state: &S, ctx: &StepContext, d: usize)
        -> Result<Vec<ProposedAction<A>>>;
}

/// Scores a reasoning step.
pub trait RewardFunction<S, A>: Send + Sync {
    /// Lightweight reward usable before the next state exists.
    fn fast_reward(&self, state: &S, action: &A, ctx: &StepContext) -> Result<f64>;

    /// Full reward of the realized transition.
    fn full_reward(&self, state: &S, action: &A, next_state: &S, ctx: &StepContext) -> Result<f64>;
}

// --- reward combinators ---------------------------------------------------

/// Weighted geometric mean of components in (0, 1].
///
/// With two components and weights `[alpha, 1 - alpha]` this is
/// `v0^alpha * v1^(1-alpha)`. Weights must sum to 1 (tolerance 1e-9) and
/// every component must be strictly positive.
pub fn combine_geometric(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Domain(format!(
            "{} values vs {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::Domain("no components".into()));
    }
    let weight_sum: f64 = weights.iter().sum();
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("weights sum to {weight_sum}, not 1")));
    }
    for v in values {
        if *v <= 0.0 {
            return Err(Error::Domain(format!("nonpositive component {v}")));
        }
    }
    Ok(values
        .iter()
        .zip(weights)
        .map(|(v, w)| v.powf(*w))
        .product())
}

/// Named reward components combined by weighted geometric mean after
/// clamping each component up to `floor` (components of exactly 0 would
/// otherwise annihilate the product).
#[derive(Debug, Clone, Default)]
pub struct RewardComponents {
    components: Vec<(String, f64, f64)>,
}

impl RewardComponents {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, weight: f64) {
        self.components.push((name.into(), value, weight));
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Combine with weights renormalized to sum 1 and values clamped to
    /// `[floor, 1]`.
    pub fn combine(&self, floor: f64) -> Result<f64> {
        if self.components.is_empty() {
            return Err(Error::Domain("no components".into()));
        }
        let total_weight: f64 = self.components.iter().map(|(_, _, w)| w).sum();
        if total_weight <= 0.0 {
            return Err(Error::Domain("component weights sum to zero".into()));
        }
        let values: Vec<f64> = self
            .components
            .iter()
            .map(|(_, v, _)| v.clamp(floor, 1.0))
            .collect();
        let weights: Vec<f64> = self
            .components
            .iter()
            .map(|(_, _, w)| w / total_weight)
            .collect();
        combine_geometric(&values, &weights)
    }
}

/// Most frequent answer after normalization, with its sample proportion.
///
/// Ties go to the answer that appears first. The confidence lies in
/// `[1/n, 1]` by construction.
pub fn confidence_from_samples(answers: &[String]) -> Result<(String, f64)> {
    if answers.is_empty() {
        return Err(Error::EmptySamples);
    }
    let normalized: Vec<String> = answers.iter().map(|a| normalize_answer(a)).collect();
    let mut keys: Vec<&String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for answer in &normalized {
        match keys.iter().position(|k| *k == answer) {
            Some(i) => counts[i] += 1,
            None => {
                keys.push(answer);
                counts.push(1);
            }
        }
    }
    let best = (0..keys.len())
        .max_by(|a, b| counts[*a].cmp(&counts[*b]).then(b.cmp(a)))
        .expect("non-empty");
    Ok((
        keys[best].clone(),
        counts[best] as f64 / answers.len() as f64,
    ))
}

/// Normalize an answer string for mode counting: trim whitespace, strip
/// trailing punctuation, canonicalize numerals ("32.0" -> "32").
pub fn normalize_answer(answer: &str) -> String {
    let trimmed = answer
        .trim()
        .trim_end_matches(['.', ',', '!', '?', ';', ':']);
    if let Ok(value) = trimmed.replace(',', "").parse::<f64>() {
        return canonical_number(value);
    }
    trimmed.to_string()
}

/// Shortest canonical rendering of a numeric value.
pub fn canonical_number(value: f64) -> String {
    if value == value.trunc() && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// How the Yes probability is turned into a reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfEvalMode {
    /// P(Yes) / (P(Yes) + P(No)).
    #[default]
    Renormalized,
    /// Raw P(Yes) from the next-token distribution.
    RawYes,
}

/// Self-evaluation reward: probability of "Yes" at the judgment position.
///
/// `prompt` must end exactly where the verdict token goes.
pub fn self_eval_reward(
    backend: &Arc<dyn TextBackend>,
    prompt: &str,
    mode: SelfEvalMode,
) -> Result<f64> {
    let probs =
        backend.next_token_probability(prompt, &["Yes".to_string(), "No".to_string()])?;
    let yes = probs[0].probability;
    let no = probs[1].probability;
    match mode {
        SelfEvalMode::RawYes => Ok(yes),
        SelfEvalMode::Renormalized => {
            if yes + no <= 0.0 {
                return Err(Error::DegenerateDistribution);
            }
            Ok(yes / (yes + no))
        }
    }
}
