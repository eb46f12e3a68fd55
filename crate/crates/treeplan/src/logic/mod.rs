//! Rule-based deduction: claim states, rule-selection actions, a one-hop
//! world model, proof checking and a seeded problem generator.

pub mod domain;
pub mod ontology;

pub use domain::{LogicDomain, LogicPrompts, StepReward};
pub use ontology::{deduce, pluralize, singularize, Claim, Ontology, Predicate, Rule};

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::search::Trace;

/// The fact currently in focus.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClaimState {
    pub claim: Claim,
    pub depth: usize,
    pub finished: bool,
}

impl ClaimState {
    pub fn start(claim: Claim) -> Self {
        Self {
            claim,
            depth: 0,
            finished: false,
        }
    }
}

impl fmt::Display for ClaimState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.finished {
            write!(f, "{} Finish.", self.claim)
        } else {
            write!(f, "{}", self.claim)
        }
    }
}

/// Either apply a rule from the fact set or finish.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RuleAction {
    Apply(Rule),
    Finish,
}

impl fmt::Display for RuleAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleAction::Apply(rule) => write!(f, "{}", rule.text),
            RuleAction::Finish => write!(f, "Finish."),
        }
    }
}

/// One deduction problem: ontology, hypothesis query, gold label and proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogicProblem {
    pub ontology: Ontology,
    pub query: Claim,
    pub gold_label: bool,
    pub gold_proof: Vec<Rule>,
    pub hops: usize,
}

impl LogicProblem {
    pub fn query_line(&self) -> String {
        format!("True or false: {}", self.query)
    }

    pub fn start_state(&self) -> ClaimState {
        ClaimState::start(self.ontology.membership.clone())
    }
}

/// Rules whose antecedent matches the claim, plus Finish when the claim
/// decides the query. Finish comes first so reward ties prefer it; the
/// rest keep ontology order. An empty result marks a dead end.
pub fn applicable_rules(ontology: &Ontology, claim: &Claim, query: &Claim) -> Vec<RuleAction> {
    let mut actions = Vec::new();
    if claim.decides(query) {
        actions.push(RuleAction::Finish);
    }
    if claim.positive {
        if let Predicate::Category(c) = &claim.predicate {
            for rule in &ontology.rules {
                if rule.antecedent == *c {
                    actions.push(RuleAction::Apply(rule.clone()));
                }
            }
        }
    }
    actions
}

/// Outcome of replaying a trace through the symbolic one-hop model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofCheck {
    /// Truth value implied by the final claim, when it decides the query.
    pub predicted_label: Option<bool>,
    pub proof_valid: bool,
}

/// Replay every step through symbolic deduction. The proof is valid iff all
/// steps apply and the final claim matches or negates the query.
pub fn check_proof(problem: &LogicProblem, trace: &Trace<ClaimState, RuleAction>) -> ProofCheck {
    let mut current = problem.ontology.membership.clone();
    let mut valid = true;
    for step in &trace.steps {
        if step.state.claim != current {
            valid = false;
            break;
        }
        match &step.action {
            RuleAction::Finish => {
                if !current.decides(&problem.query) {
                    valid = false;
                }
                break;
            }
            RuleAction::Apply(rule) => {
                if !problem.ontology.rules.iter().any(|r| r.text == rule.text) {
                    valid = false;
                    break;
                }
                match deduce(&current, rule) {
                    Ok(next) => current = next,
                    Err(_) => {
                        valid = false;
                        break;
                    }
                }
            }
        }
    }
    let predicted_label = if current.decides(&problem.query) {
        Some(current.positive == problem.query.positive)
    } else {
        None
    };
    ProofCheck {
        predicted_label,
        proof_valid: valid && predicted_label.is_some(),
    }
}

// --- generator ----------------------------------------------------------------

const ENTITY_POOL: [&str; 10] = [
    "Alex", "Sam", "Polly", "Stella", "Max", "Wren", "Sally", "Fae", "Rex", "Ben",
];

const CATEGORY_POOL: [&str; 16] = [
    "wumpus", "yumpus", "zumpus", "dumpus", "rompus", "numpus", "tumpus", "vumpus", "impus",
    "jompus", "grimpus", "lorpus", "brimpus", "shumpus", "lempus", "folpus",
];

const PROPERTY_POOL: [&str; 8] = [
    "bright", "dull", "fiery", "bold", "tender", "meek", "grumpy", "gentle",
];

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => format!("{}{}", first.to_uppercase(), chars.as_str()),
        None => String::new(),
    }
}

fn article_for(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn rule_sentence(
    rng: &mut ChaCha8Rng,
    antecedent: &str,
    object: &Predicate,
    positive: bool,
) -> String {
    let negation = if positive { "" } else { "not " };
    match rng.gen_range(0..3) {
        form @ (0 | 1) => {
            let quantifier = if form == 0 { "Each" } else { "Every" };
            let object_text = match object {
                Predicate::Category(c) => format!("{negation}{} {c}", article_for(c)),
                Predicate::Property(p) => format!("{negation}{p}"),
            };
            format!("{quantifier} {antecedent} is {object_text}.")
        }
        _ => {
            let object_text = match object {
                Predicate::Category(c) => format!("{negation}{}", pluralize(c)),
                Predicate::Property(p) => format!("{negation}{p}"),
            };
            format!("{} are {object_text}.", capitalize(&pluralize(antecedent)))
        }
    }
}

/// Build a seeded problem: a category chain of length `hops` ending in one
/// property rule, plus `distractor_count` off-chain rules, shuffled. Labels
/// are balanced across seeds (even seed: true, odd seed: false).
pub fn generate_problem(seed: u64, hops: usize, distractor_count: usize) -> LogicProblem {
    assert!((2..=6).contains(&hops), "hops must be in 2..=6");
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(hops as u64));
    let entity = ENTITY_POOL[rng.gen_range(0..ENTITY_POOL.len())];
    let mut categories: Vec<&str> = CATEGORY_POOL.to_vec();
    for i in (1..categories.len()).rev() {
        let j = rng.gen_range(0..=i);
        categories.swap(i, j);
    }
    let chain: Vec<String> = categories[..hops].iter().map(|s| s.to_string()).collect();
    let property = PROPERTY_POOL[rng.gen_range(0..PROPERTY_POOL.len())].to_string();
    let conclusion_positive = rng.gen_bool(0.5);

    let mut gold_proof = Vec::new();
    for i in 0..hops - 1 {
        let sentence = rule_sentence(
            &mut rng,
            &chain[i],
            &Predicate::Category(chain[i + 1].clone()),
            true,
        );
        gold_proof.push(Rule::parse(&sentence).expect("generated rule parses"));
    }
    let property_sentence = rule_sentence(
        &mut rng,
        &chain[hops - 1],
        &Predicate::Property(property.clone()),
        conclusion_positive,
    );
    gold_proof.push(Rule::parse(&property_sentence).expect("generated rule parses"));

    // Distractors branch off the chain (or off earlier distractors) into
    // fresh categories, producing dead ends the search must back out of.
    let mut rules = gold_proof.clone();
    let mut distractor_cats: Vec<String> = Vec::new();
    let mut fresh = categories[hops..].iter().map(|s| s.to_string());
    for _ in 0..distractor_count {
        let target = match fresh.next() {
            Some(c) => c,
            None => break,
        };
        let anchor = if !distractor_cats.is_empty() && rng.gen_bool(0.4) {
            distractor_cats[rng.gen_range(0..distractor_cats.len())].clone()
        } else {
            chain[rng.gen_range(0..hops)].clone()
        };
        let sentence = rule_sentence(&mut rng, &anchor, &Predicate::Category(target.clone()), true);
        rules.push(Rule::parse(&sentence).expect("generated rule parses"));
        distractor_cats.push(target);
    }
    for i in (1..rules.len()).rev() {
        let j = rng.gen_range(0..=i);
        rules.swap(i, j);
    }

    let membership = Claim::new(entity, Predicate::Category(chain[0].clone()), true);
    let gold_label = seed % 2 == 0;
    let query_positive = if gold_label {
        conclusion_positive
    } else {
        !conclusion_positive
    };
    let query = Claim::new(entity, Predicate::Property(property), query_positive);
    LogicProblem {
        ontology: Ontology::new(rules, membership).expect("generated ontology is consistent"),
        query,
        gold_label,
        gold_proof,
        hops,
    }
}

// --- file format ----------------------------------------------------------------

/// JSON problem file. `query` accepts both "True or false: X is Y." and the
/// bare claim sentence; PrOntoQA-style dumps map onto the same fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogicProblemFile {
    pub facts: Vec<String>,
    pub membership: String,
    pub query: String,
    pub label: bool,
    #[serde(default)]
    pub gold_proof: Vec<String>,
    #[serde(default)]
    pub hops: Option<usize>,
}

impl LogicProblem {
    pub fn from_problem_file(file: &LogicProblemFile) -> Result<Self> {
        let ontology = Ontology::parse(&file.facts, &file.membership)?;
        let query_text = file
            .query
            .trim()
            .strip_prefix("True or false:")
            .unwrap_or(&file.query)
            .trim();
        let query = Claim::parse(query_text)?;
        let gold_proof = file
            .gold_proof
            .iter()
            .map(|t| Rule::parse(t))
            .collect::<Result<Vec<_>>>()?;
        let hops = file.hops.unwrap_or(gold_proof.len());
        Ok(LogicProblem {
            ontology,
            query,
            gold_label: file.label,
            gold_proof,
            hops,
        })
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: LogicProblemFile = serde_json::from_str(&text)?;
        Self::from_problem_file(&file)
    }

    pub fn to_problem_file(&self) -> LogicProblemFile {
        LogicProblemFile {
            facts: self.ontology.rules.iter().map(|r| r.text.clone()).collect(),
            membership: self.ontology.membership.to_string(),
            query: self.query_line(),
            label: self.gold_label,
            gold_proof: self.gold_proof.iter().map(|r| r.text.clone()).collect(),
            hops: Some(self.hops),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::TraceStep;

    fn paper_ontology() -> (Ontology, Claim) {
        let facts: Vec<String> = [
            "Each lepidopteran is an insect.",
            "Each arthropod is a protostome.",
            "Every animal is multicellular.",
            "Protostomes are invertebrates.",
            "Each whale is bony.",
            "Each painted lady is a butterfly.",
            "Invertebrates are animals.",
            "Butterflies are lepidopterans.",
            "Each insect is six-legged.",
            "Every insect is an arthropod.",
            "Arthropods are not bony.",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let ontology = Ontology::parse(&facts, "Sally is a painted lady.").unwrap();
        let query = Claim::parse("Sally is not bony.").unwrap();
        (ontology, query)
    }

    #[test]
    fn applicable_rules_match_antecedent() {
        let (ontology, query) = paper_ontology();
        let claim = Claim::parse("Sally is a butterfly.").unwrap();
        let actions = applicable_rules(&ontology, &claim, &query);
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].to_string(), "Butterflies are lepidopterans.");
    }

    #[test]
    fn finish_offered_when_claim_decides_query() {
        let (ontology, query) = paper_ontology();
        let claim = Claim::parse("Sally is not bony.").unwrap();
        let actions = applicable_rules(&ontology, &claim, &query);
        assert_eq!(actions, vec![RuleAction::Finish]);
    }

    #[test]
    fn dead_end_has_no_actions() {
        let (ontology, query) = paper_ontology();
        // A property claim that does not decide the query: nothing applies.
        let claim = Claim::parse("Sally is six-legged.").unwrap();
        assert!(applicable_rules(&ontology, &claim, &query).is_empty());
    }

    fn trace_from(
        problem: &LogicProblem,
        actions: &[RuleAction],
    ) -> Trace<ClaimState, RuleAction> {
        let mut state = problem.start_state();
        let mut steps = Vec::new();
        for action in actions {
            let next = match action {
                RuleAction::Apply(rule) => ClaimState {
                    claim: deduce(&state.claim, rule).unwrap(),
                    depth: state.depth + 1,
                    finished: false,
                },
                RuleAction::Finish => ClaimState {
                    claim: state.claim.clone(),
                    depth: state.depth + 1,
                    finished: true,
                },
            };
            steps.push(TraceStep {
                state: state.clone(),
                action: action.clone(),
                full_reward: 1.0,
            });
            state = next;
        }
        Trace::new(steps, state)
    }

    #[test]
    fn gold_proof_validates() {
        let problem = generate_problem(4, 3, 5);
        let mut actions: Vec<RuleAction> = problem
            .gold_proof
            .iter()
            .map(|r| RuleAction::Apply(r.clone()))
            .collect();
        actions.push(RuleAction::Finish);
        let trace = trace_from(&problem, &actions);
        let check = check_proof(&problem, &trace);
        assert!(check.proof_valid);
        assert_eq!(check.predicted_label, Some(problem.gold_label));
    }

    #[test]
    fn skipping_a_hop_invalidates_proof() {
        let problem = generate_problem(9, 4, 4);
        let mut proof = problem.gold_proof.clone();
        proof.remove(1);
        let mut state = problem.start_state();
        let mut steps = Vec::new();
        for rule in &proof {
            let action = RuleAction::Apply(rule.clone());
            steps.push(TraceStep {
                state: state.clone(),
                action,
                full_reward: 1.0,
            });
            // Force the claimed next state even where the rule cannot apply.
            state = ClaimState {
                claim: Claim::new(
                    state.claim.entity.clone(),
                    rule.consequent.clone(),
                    rule.positive,
                ),
                depth: state.depth + 1,
                finished: false,
            };
        }
        let trace = Trace::new(steps, state);
        assert!(!check_proof(&problem, &trace).proof_valid);
    }

    #[test]
    fn non_deciding_trace_is_invalid() {
        let problem = generate_problem(12, 3, 5);
        let first = RuleAction::Apply(problem.gold_proof[0].clone());
        let trace = trace_from(&problem, &[first]);
        let check = check_proof(&problem, &trace);
        assert!(!check.proof_valid);
        assert_eq!(check.predicted_label, None);
    }

    #[test]
    fn generation_is_seeded_and_sized() {
        let a = generate_problem(7, 5, 6);
        let b = generate_problem(7, 5, 6);
        assert_eq!(a.ontology, b.ontology);
        assert_eq!(a.gold_proof.len(), 5);
        assert_eq!(a.ontology.rules.len(), 11);
        assert!(generate_problem(2, 3, 3).gold_label);
        assert!(!generate_problem(3, 3, 3).gold_label);
    }

    #[test]
    fn problem_file_round_trip() {
        let problem = generate_problem(21, 4, 5);
        let file = problem.to_problem_file();
        let text = serde_json::to_string(&file).unwrap();
        let parsed: LogicProblemFile = serde_json::from_str(&text).unwrap();
        let rebuilt = LogicProblem::from_problem_file(&parsed).unwrap();
        assert_eq!(rebuilt.ontology, problem.ontology);
        assert_eq!(rebuilt.query, problem.query);
        assert_eq!(rebuilt.gold_label, problem.gold_label);
        assert_eq!(rebuilt.gold_proof, problem.gold_proof);
    }
}
