//! Contract implementations for the deduction domain.
//!
//! The world model and policy come in symbolic and backend-driven variants;
//! step rewards come from a backend self-evaluation, an exact oracle (1.0 on
//! a shortest deciding chain, 0.1 off it), or the oracle with deterministic
//! seeded flips for robustness experiments.

use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::ontology::{deduce, Claim, Predicate};
use super::{applicable_rules, ClaimState, LogicProblem, RuleAction};
use crate::backend::{GenerationRequest, TextBackend};
use crate::contracts::{
    self, Policy, ProposedAction, RewardFunction, SelfEvalMode, StepContext, WorldModel,
};
use crate::error::{Error, Result};
use crate::template::Template;

const NEXT_TEMPLATE: &str = include_str!("../../templates/logic_next.txt");
const EVAL_TEMPLATE: &str = include_str!("../../templates/logic_eval.txt");

/// Prompt set for the deduction domain. The shipped next-step template shows
/// six worked fact sets, so the live problem is numbered 7.
#[derive(Debug, Clone)]
pub struct LogicPrompts {
    pub next: Template,
    pub eval: Template,
    pub problem_index: usize,
}

impl Default for LogicPrompts {
    fn default() -> Self {
        Self {
            next: Template::new(NEXT_TEMPLATE),
            eval: Template::new(EVAL_TEMPLATE),
            problem_index: 7,
        }
    }
}

impl LogicPrompts {
    pub fn from_dir(dir: impl AsRef<std::path::Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            next: Template::load(dir.join("logic_next.txt"))?,
            eval: Template::load(dir.join("logic_eval.txt"))?,
            problem_index: 7,
        })
    }

    /// Next-step prompt ending at "Next 7.k:".
    pub fn next_prompt(&self, problem: &LogicProblem, claim: &Claim, depth: usize) -> Result<String> {
        let base = self.next.render(&[
            ("fact", &problem.ontology.facts_line()),
            ("query", &problem.query_line()),
        ])?;
        let i = self.problem_index;
        let k = depth + 1;
        Ok(format!("{base}Claim {i}.{k}: {claim}\nNext {i}.{k}:"))
    }

    /// Yes/No judgment prompt for a proposed step.
    pub fn eval_prompt(&self, problem: &LogicProblem, claim: &Claim, action: &RuleAction) -> Result<String> {
        self.eval.render(&[
            ("fact", &problem.ontology.facts_line()),
            ("query", &problem.query_line()),
            ("claim", &claim.to_string()),
            ("rule", &action.to_string()),
        ])
    }
}

/// How step rewards are produced.
#[derive(Clone)]
pub enum StepReward {
    /// Self-evaluation through a text backend with labeled demonstrations.
    Backend(Arc<dyn TextBackend>),
    /// 1.0 on a shortest deciding chain from the claim, 0.1 off it.
    Oracle,
    /// Oracle with each (claim, action) judgment flipped with probability
    /// `flip_prob`, deterministically in the seed.
    NoisyOracle { flip_prob: f64, seed: u64 },
}

/// The deduction domain bundle: implements all three contracts.
pub struct LogicDomain {
    pub problem: LogicProblem,
    pub prompts: LogicPrompts,
    pub reward: StepReward,
    /// Sample rule proposals through a backend instead of enumerating.
    policy_backend: Option<Arc<dyn TextBackend>>,
    /// Predict next claims through a backend instead of symbolic deduction.
    world_backend: Option<Arc<dyn TextBackend>>,
}

impl LogicDomain {
    pub fn symbolic(problem: LogicProblem, reward: StepReward) -> Self {
        Self {
            problem,
            prompts: LogicPrompts::default(),
            reward,
            policy_backend: None,
            world_backend: None,
        }
    }

    pub fn with_policy_backend(mut self, backend: Arc<dyn TextBackend>) -> Self {
        self.policy_backend = Some(backend);
        self
    }

    pub fn with_world_backend(mut self, backend: Arc<dyn TextBackend>) -> Self {
        self.world_backend = Some(backend);
        self
    }

    /// Shortest number of rule applications from `claim` to a claim deciding
    /// the query; `None` when unreachable.
    pub fn distance_to_decision(&self, claim: &Claim) -> Option<usize> {
        if claim.decides(&self.problem.query) {
            return Some(0);
        }
        let mut frontier = vec![claim.clone()];
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut dist = 0usize;
        while !frontier.is_empty() && dist <= self.problem.ontology.rules.len() {
            dist += 1;
            let mut next_frontier = Vec::new();
            for current in frontier {
                for action in
                    applicable_rules(&self.problem.ontology, &current, &self.problem.query)
                {
                    if let RuleAction::Apply(rule) = action {
                        let next = deduce(&current, &rule).expect("applicable rule deduces");
                        if next.decides(&self.problem.query) {
                            return Some(dist);
                        }
                        let key = next.to_string();
                        if seen.insert(key) {
                            next_frontier.push(next);
                        }
                    }
                }
            }
            frontier = next_frontier;
        }
        None
    }

    fn oracle_reward(&self, claim: &Claim, action: &RuleAction) -> f64 {
        const OFF_PATH: f64 = 0.1;
        match action {
            RuleAction::Finish => {
                if claim.decides(&self.problem.query) {
                    1.0
                } else {
                    OFF_PATH
                }
            }
            RuleAction::Apply(rule) => match (
                self.distance_to_decision(claim),
                deduce(claim, rule).ok(),
            ) {
                (Some(d), Some(next)) => {
                    let next_d = self.distance_to_decision(&next);
                    if next_d == Some(d.saturating_sub(1)) && d > 0 {
                        1.0
                    } else {
                        OFF_PATH
                    }
                }
                _ => OFF_PATH,
            },
        }
    }

    pub fn step_reward(&self, claim: &Claim, action: &RuleAction) -> Result<f64> {
        match &self.reward {
            StepReward::Oracle => Ok(self.oracle_reward(claim, action)),
            StepReward::NoisyOracle { flip_prob, seed } => {
                let value = self.oracle_reward(claim, action);
                let mut hasher = std::collections::hash_map::DefaultHasher::new();
                seed.hash(&mut hasher);
                claim.to_string().hash(&mut hasher);
                action.to_string().hash(&mut hasher);
                let draw = (hasher.finish() >> 11) as f64 / (1u64 << 53) as f64;
                if draw < *flip_prob {
                    Ok(if value > 0.5 { 0.1 } else { 1.0 })
                } else {
                    Ok(value)
                }
            }
            StepReward::Backend(backend) => {
                let prompt = self.prompts.eval_prompt(&self.problem, claim, action)?;
                contracts::self_eval_reward(backend, &prompt, SelfEvalMode::Renormalized)
            }
        }
    }

    fn symbolic_proposals(&self, state: &ClaimState) -> Vec<ProposedAction<RuleAction>> {
        let actions = applicable_rules(&self.problem.ontology, &state.claim, &self.problem.query);
        let log_prob = -((actions.len().max(1)) as f64).ln();
        actions
            .into_iter()
            .map(|a| ProposedAction::new(a, log_prob))
            .collect()
    }

    fn backend_proposals(
        &self,
        backend: &Arc<dyn TextBackend>,
        state: &ClaimState,
        d: usize,
    ) -> Result<Vec<ProposedAction<RuleAction>>> {
        let prompt = self
            .prompts
            .next_prompt(&self.problem, &state.claim, state.depth)?;
        let request = GenerationRequest::new(prompt)
            .with_samples(d)
            .with_stop(&["\n"]);
        let samples = backend.generate(&request)?;
        let applicable =
            applicable_rules(&self.problem.ontology, &state.claim, &self.problem.query);
        let mut proposals: Vec<ProposedAction<RuleAction>> = Vec::new();
        let mut weights: HashMap<String, f64> = HashMap::new();
        for sample in samples {
            let text = sample.text.trim();
            let action = if text == "Finish." || text == "Finish" {
                RuleAction::Finish
            } else {
                match self
                    .problem
                    .ontology
                    .rules
                    .iter()
                    .find(|r| r.text == text || r.text.trim_end_matches('.') == text)
                {
                    Some(rule) => RuleAction::Apply(rule.clone()),
                    // "Copy the exact sentences": anything else is noise.
                    None => continue,
                }
            };
            // Only steps the symbolic model can actually take become edges.
            if !applicable.contains(&action) {
                continue;
            }
            let key = action.to_string();
            if weights.contains_key(&key) {
                continue;
            }
            weights.insert(key, sample.total_logprob);
            proposals.push(ProposedAction::new(action, sample.total_logprob.min(0.0)));
        }
        Ok(proposals)
    }
}

impl WorldModel<ClaimState, RuleAction> for LogicDomain {
    fn next_state(
        &self,
        state: &ClaimState,
        action: &RuleAction,
        _ctx: &StepContext,
    ) -> Result<ClaimState> {
        match action {
            RuleAction::Finish => Ok(ClaimState {
                claim: state.claim.clone(),
                depth: state.depth + 1,
                finished: true,
            }),
            RuleAction::Apply(rule) => {
                let claim = match &self.world_backend {
                    None => deduce(&state.claim, rule)?,
                    Some(backend) => {
                        let prompt = format!(
                            "Given a claim about an entity and a general fact, state the new claim that follows for the entity. Answer with one sentence.\n\nClaim: {}\nFact: {}\nNew claim:",
                            state.claim, rule.text
                        );
                        let request = GenerationRequest::new(prompt).with_stop(&["\n"]);
                        let samples = backend.generate(&request)?;
                        let text = samples
                            .first()
                            .map(|s| s.text.trim().to_string())
                            .unwrap_or_default();
                        Claim::parse(&text)?
                    }
                };
                Ok(ClaimState {
                    claim,
                    depth: state.depth + 1,
                    finished: false,
                })
            }
        }
    }

    fn is_terminal(&self, state: &ClaimState, _depth: usize) -> bool {
        state.finished
            || applicable_rules(&self.problem.ontology, &state.claim, &self.problem.query)
                .is_empty()
    }
}

impl Policy<ClaimState, RuleAction> for LogicDomain {
    fn propose_actions(
        &self,
        state: &ClaimState,
        _ctx: &StepContext,
        d: usize,
    ) -> Result<Vec<ProposedAction<RuleAction>>> {
        match &self.policy_backend {
            None => Ok(self.symbolic_proposals(state)),
            Some(backend) => {
                let mut proposals = self.backend_proposals(backend, state, d)?;
                if proposals.is_empty() {
                    // The sampler missed every exact sentence; fall back to
                    // enumeration so the search can continue.
                    proposals = self.symbolic_proposals(state);
                }
                Ok(proposals)
            }
        }
    }
}

impl RewardFunction<ClaimState, RuleAction> for LogicDomain {
    fn fast_reward(&self, state: &ClaimState, action: &RuleAction, _ctx: &StepContext) -> Result<f64> {
        self.step_reward(&state.claim, action)
    }

    fn full_reward(
        &self,
        state: &ClaimState,
        action: &RuleAction,
        _next: &ClaimState,
        _ctx: &StepContext,
    ) -> Result<f64> {
        self.step_reward(&state.claim, action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{Matcher, MockBackend, MockScript};
    use crate::logic::generate_problem;
    use crate::search::{run_search, SearchConfig, TracePolicy};

    fn config() -> SearchConfig {
        SearchConfig {
            n_iterations: 20,
            branch_factor: 16,
            depth_limit: 8,
            trace_policy: TracePolicy::BestIteration,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn oracle_rewards_gold_step() {
        let problem = generate_problem(2, 3, 4);
        let domain = LogicDomain::symbolic(problem.clone(), StepReward::Oracle);
        let start = problem.start_state();
        let gold = RuleAction::Apply(problem.gold_proof[0].clone());
        assert_eq!(domain.step_reward(&start.claim, &gold).unwrap(), 1.0);
        // Any distractor from the start claim scores 0.1.
        for action in applicable_rules(&problem.ontology, &start.claim, &problem.query) {
            if action != gold {
                assert_eq!(domain.step_reward(&start.claim, &action).unwrap(), 0.1);
            }
        }
    }

    #[test]
    fn search_with_oracle_reward_finds_gold_proof() {
        for seed in 0..6 {
            let problem = generate_problem(seed, 3 + (seed as usize % 3), 5);
            let domain = LogicDomain::symbolic(problem.clone(), StepReward::Oracle);
            let result = run_search(
                problem.start_state(),
                &domain,
                &domain,
                &domain,
                &config(),
            )
            .unwrap();
            let best = result.best.as_ref().expect("trace");
            let check = super::super::check_proof(&problem, best);
            assert!(check.proof_valid, "seed {seed}");
            assert_eq!(check.predicted_label, Some(problem.gold_label));
        }
    }

    #[test]
    fn dead_ends_terminate_and_search_recovers() {
        // Noisy rewards push the first rollout into a distractor; the tree
        // still completes every iteration and later finds the gold chain.
        let problem = generate_problem(6, 4, 6);
        let domain = LogicDomain::symbolic(
            problem.clone(),
            StepReward::NoisyOracle {
                flip_prob: 0.35,
                seed: 13,
            },
        );
        let result = run_search(
            problem.start_state(),
            &domain,
            &domain,
            &domain,
            &config(),
        )
        .unwrap();
        assert_eq!(result.iterations.len(), 20);
    }

    #[test]
    fn noisy_oracle_is_deterministic() {
        let problem = generate_problem(8, 3, 4);
        let domain = LogicDomain::symbolic(
            problem.clone(),
            StepReward::NoisyOracle {
                flip_prob: 0.2,
                seed: 99,
            },
        );
        let start = problem.start_state();
        let action = RuleAction::Apply(problem.gold_proof[0].clone());
        let a = domain.step_reward(&start.claim, &action).unwrap();
        let b = domain.step_reward(&start.claim, &action).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn backend_policy_parses_exact_sentences() {
        let problem = generate_problem(10, 3, 3);
        let gold_text = problem.gold_proof[0].text.clone();
        let script = MockScript::builder()
            .respond(
                Matcher::glob("*Next 7.1:*"),
                &[&format!(" {gold_text}"), " not a real fact.", " Finish."],
            )
            .build();
        let domain = LogicDomain::symbolic(problem.clone(), StepReward::Oracle)
            .with_policy_backend(Arc::new(MockBackend::new(script, 0)));
        let proposals = domain
            .propose_actions(&problem.start_state(), &StepContext::default(), 3)
            .unwrap();
        // The noise line is dropped; Finish does not apply at the start.
        assert_eq!(proposals.len(), 1);
        assert_eq!(proposals[0].action.to_string(), gold_text);
    }

    #[test]
    fn backend_world_model_parses_new_claim() {
        let problem = generate_problem(14, 3, 3);
        let start = problem.start_state();
        let rule = problem.gold_proof[0].clone();
        let expected = deduce(&start.claim, &rule).unwrap();
        let script = MockScript::builder()
            .respond(Matcher::glob("*New claim:*"), &[&format!(" {expected}")])
            .build();
        let domain = LogicDomain::symbolic(problem.clone(), StepReward::Oracle)
            .with_world_backend(Arc::new(MockBackend::new(script, 0)));
        let next = domain
            .next_state(&start, &RuleAction::Apply(rule), &StepContext::default())
            .unwrap();
        assert_eq!(next.claim, expected);
    }

    #[test]
    fn backend_step_reward_reads_yes_probability() {
        let problem = generate_problem(16, 3, 3);
        let script = MockScript::builder()
            .next_token(Matcher::glob("*Judgment 3.1:*"), &[("Yes", 0.7), ("No", 0.3)])
            .build();
        let domain = LogicDomain::symbolic(problem.clone(), StepReward::Backend(Arc::new(
            MockBackend::new(script, 0),
        )));
        let start = problem.start_state();
        let action = RuleAction::Apply(problem.gold_proof[0].clone());
        let r = domain.step_reward(&start.claim, &action).unwrap();
        assert!((r - 0.7).abs() < 1e-12);
    }
}
