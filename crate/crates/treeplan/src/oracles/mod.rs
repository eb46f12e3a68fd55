//! Independent ground truth: an enumerable toy MDP with exact Q tables, a
//! breadth-first optimal planner and plan validator for the block domain,
//! and a forward-chaining prover for the deduction domain. These never share
//! code with the implementations they check.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::blocksworld::{
    apply, valid_actions, BlockAction, BlockState, BlocksProblem,
};
use crate::contracts::{Policy, ProposedAction, RewardFunction, StepContext, WorldModel};
use crate::error::{Error, Result};
use crate::logic::{applicable_rules, deduce, Claim, Ontology, Rule, RuleAction};
use crate::search::QAggregator;

// --- toy MDP -------------------------------------------------------------------

/// A fully enumerable deterministic MDP used as a search fixture. States are
/// indices; transitions and rewards live in explicit tables.
#[derive(Debug, Clone, Default)]
pub struct ToyMdp {
    /// Per-state outgoing (label, reward, next_state) rows, in action order.
    transitions: Vec<Vec<(String, f64, usize)>>,
    terminal: Vec<bool>,
    pub depth_bound: usize,
}

impl ToyMdp {
    pub fn new(n_states: usize, depth_bound: usize) -> Self {
        Self {
            transitions: vec![Vec::new(); n_states],
            terminal: vec![false; n_states],
            depth_bound,
        }
    }

    pub fn add_edge(&mut self, from: usize, label: impl Into<String>, reward: f64, to: usize) {
        self.transitions[from].push((label.into(), reward, to));
    }

    pub fn mark_terminal(&mut self, state: usize) {
        self.terminal[state] = true;
    }

    pub fn n_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_terminal_state(&self, state: usize) -> bool {
        self.terminal[state]
    }

    fn edge(&self, from: usize, label: &str) -> Option<&(String, f64, usize)> {
        self.transitions[from].iter().find(|(l, _, _)| l == label)
    }
}

impl WorldModel<usize, String> for ToyMdp {
    fn next_state(&self, state: &usize, action: &String, _ctx: &StepContext) -> Result<usize> {
        self.edge(*state, action)
            .map(|(_, _, to)| *to)
            .ok_or_else(|| Error::Domain(format!("no edge {action:?} from state {state}")))
    }

    fn is_terminal(&self, state: &usize, _depth: usize) -> bool {
        self.terminal[*state] || self.transitions[*state].is_empty()
    }
}

impl Policy<usize, String> for ToyMdp {
    fn propose_actions(
        &self,
        state: &usize,
        _ctx: &StepContext,
        _d: usize,
    ) -> Result<Vec<ProposedAction<String>>> {
        Ok(self.transitions[*state]
            .iter()
            .map(|(label, _, _)| ProposedAction::new(label.clone(), 0.0))
            .collect())
    }
}

impl RewardFunction<usize, String> for ToyMdp {
    fn fast_reward(&self, state: &usize, action: &String, _ctx: &StepContext) -> Result<f64> {
        self.edge(*state, action)
            .map(|(_, r, _)| *r)
            .ok_or_else(|| Error::Domain(format!("no edge {action:?} from state {state}")))
    }

    fn full_reward(
        &self,
        state: &usize,
        action: &String,
        _next: &usize,
        ctx: &StepContext,
    ) -> Result<f64> {
        self.fast_reward(state, action, ctx)
    }
}

/// Exact per-edge Q table computed by exhaustive root-to-terminal path
/// enumeration, keyed by (state, action label).
///
/// Within a path the aggregator's per-iteration rule collapses the future
/// rewards of each edge; across the continuations through an edge the
/// outer rule combines them (max for MaxOfAverages/Max, uniform mean for
/// Mean/Sum). Errors with `PathBound` past `max_paths` paths.
pub fn exact_q_values(
    mdp: &ToyMdp,
    root: usize,
    aggregator: QAggregator,
    max_paths: usize,
) -> Result<BTreeMap<(usize, String), f64>> {
    let mut paths: Vec<Vec<(usize, String, f64)>> = Vec::new();
    let mut stack: Vec<(usize, Vec<(usize, String, f64)>)> = vec![(root, Vec::new())];
    while let Some((state, prefix)) = stack.pop() {
        if mdp.terminal[state]
            || mdp.transitions[state].is_empty()
            || prefix.len() >= mdp.depth_bound
        {
            if !prefix.is_empty() {
                paths.push(prefix);
                if paths.len() > max_paths {
                    return Err(Error::PathBound(max_paths));
                }
            }
            continue;
        }
        for (label, reward, to) in mdp.transitions[state].iter().rev() {
            let mut next = prefix.clone();
            next.push((state, label.clone(), *reward));
            stack.push((*to, next));
        }
    }
    let mut per_edge: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for path in &paths {
        let rewards: Vec<f64> = path.iter().map(|(_, _, r)| *r).collect();
        for (t, (state, label, _)) in path.iter().enumerate() {
            per_edge
                .entry((*state, label.clone()))
                .or_default()
                .push(aggregator.iteration_value(&rewards[t..]));
        }
    }
    Ok(per_edge
        .into_iter()
        .map(|(key, values)| {
            let q = match aggregator {
                QAggregator::MaxOfAverages | QAggregator::Max => {
                    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                }
                QAggregator::Mean | QAggregator::Sum => {
                    values.iter().sum::<f64>() / values.len() as f64
                }
            };
            (key, q)
        })
        .collect())
}

// --- blocksworld oracles ---------------------------------------------------------

/// Result of the breadth-first plan search.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSearch {
    /// A shortest plan, when one exists within the bounds.
    pub plan: Option<Vec<BlockAction>>,
    /// True when the search gave up on the state bound rather than
    /// exhausting the reachable space.
    pub truncated: bool,
    pub states_explored: usize,
}

pub const BFS_STATE_BOUND: usize = 1_000_000;

/// Breadth-first search over `valid_actions`/`apply` for a shortest plan.
pub fn bfs_optimal_plan(problem: &BlocksProblem, depth_bound: usize) -> PlanSearch {
    let mut queue: VecDeque<(BlockState, usize)> = VecDeque::new();
    let mut parents: HashMap<BlockState, (BlockState, BlockAction)> = HashMap::new();
    let mut seen: HashSet<BlockState> = HashSet::new();
    if problem.satisfied(&problem.init) {
        return PlanSearch {
            plan: Some(Vec::new()),
            truncated: false,
            states_explored: 1,
        };
    }
    queue.push_back((problem.init.clone(), 0));
    seen.insert(problem.init.clone());
    let mut truncated = false;
    while let Some((state, depth)) = queue.pop_front() {
        if depth >= depth_bound {
            continue;
        }
        for action in valid_actions(&state) {
            let next = apply(&state, &action).expect("valid action applies");
            if seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            parents.insert(next.clone(), (state.clone(), action.clone()));
            if problem.satisfied(&next) {
                let mut plan = Vec::new();
                let mut current = next;
                while let Some((prev, act)) = parents.get(&current) {
                    plan.push(act.clone());
                    current = prev.clone();
                }
                plan.reverse();
                return PlanSearch {
                    plan: Some(plan),
                    truncated: false,
                    states_explored: seen.len(),
                };
            }
            if seen.len() >= BFS_STATE_BOUND {
                truncated = true;
                queue.clear();
                break;
            }
            queue.push_back((next, depth + 1));
        }
    }
    PlanSearch {
        plan: None,
        truncated,
        states_explored: seen.len(),
    }
}

/// Outcome of replaying a plan from the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanValidation {
    pub valid: bool,
    /// Index of the failing step; equals the plan length when all actions
    /// apply but the goal is unmet.
    pub failed_step: Option<usize>,
}

/// Replay a plan through `apply`; valid iff every precondition holds and the
/// final state meets all goal conditions.
pub fn validate_plan(problem: &BlocksProblem, plan: &[BlockAction]) -> PlanValidation {
    let mut state = problem.init.clone();
    for (i, action) in plan.iter().enumerate() {
        match apply(&state, action) {
            Ok(next) => state = next,
            Err(_) => {
                return PlanValidation {
                    valid: false,
                    failed_step: Some(i),
                }
            }
        }
    }
    if problem.satisfied(&state) {
        PlanValidation {
            valid: true,
            failed_step: None,
        }
    } else {
        PlanValidation {
            valid: false,
            failed_step: Some(plan.len()),
        }
    }
}

// --- deduction oracle -------------------------------------------------------------

/// Exhaustive one-hop closure from the membership claim: returns a shortest
/// rule chain whose conclusion matches or negates the query, or `None`.
pub fn forward_chain_prove(ontology: &Ontology, query: &Claim) -> Option<Vec<Rule>> {
    let start = ontology.membership.clone();
    if start.decides(query) {
        return Some(Vec::new());
    }
    let mut queue: VecDeque<Claim> = VecDeque::new();
    let mut parents: HashMap<String, (Claim, Rule)> = HashMap::new();
    let mut seen: HashSet<String> = HashSet::new();
    queue.push_back(start.clone());
    seen.insert(start.to_string());
    while let Some(claim) = queue.pop_front() {
        for action in applicable_rules(ontology, &claim, query) {
            let rule = match action {
                RuleAction::Apply(rule) => rule,
                RuleAction::Finish => continue,
            };
            let next = deduce(&claim, &rule).expect("applicable rule deduces");
            let key = next.to_string();
            if seen.contains(&key) {
                continue;
            }
            seen.insert(key.clone());
            parents.insert(key.clone(), (claim.clone(), rule.clone()));
            if next.decides(query) {
                let mut chain = Vec::new();
                let mut current = key;
                while let Some((prev, rule)) = parents.get(&current) {
                    chain.push(rule.clone());
                    current = prev.to_string();
                }
                chain.reverse();
                return Some(chain);
            }
            queue.push_back(next);
        }
    }
    None
}
