//! Generic Monte Carlo tree search over pluggable reasoning MDPs.
//!
//! One iteration runs selection (UCT descent to a leaf of the current tree),
//! expansion (sample up to `d` actions, predict next states, attach
//! lightweight prior rewards), simulation (greedy descent by fast reward,
//! materializing nodes, until a terminal state or the depth limit) and
//! back-propagation (aggregate future rewards into per-edge Q estimates).
//! Full rewards are computed lazily on the first traversal of an edge.

mod engine;
mod tree;

pub use engine::{
    backpropagate, expand, extract_trace, greedy_chain, run_search, select_path, simulate,
    SearchResult,
};
pub use tree::{EdgeRef, NodeId, SearchEdge, SearchNode, SearchTree, TreeDump};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How per-edge Q estimates are formed from recorded rewards.
///
/// Within one iteration the rewards of all future steps `r_t..r_T` collapse
/// to a single value; across iterations those values combine into Q:
///
/// * `MaxOfAverages` — value is the maximum over horizons `l` of
///   `avg(r_t..r_l)`; history combines by max.
/// * `Mean` — value is `avg(r_t..r_T)`; history combines by mean.
/// * `Max` — value is `max(r_t..r_T)`; history combines by max.
/// * `Sum` — value is `sum(r_t..r_T)`; history combines by mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QAggregator {
    #[default]
    MaxOfAverages,
    Mean,
    Max,
    Sum,
}

impl QAggregator {
    /// Collapse the future rewards of one iteration into a single value.
    pub fn iteration_value(&self, future: &[f64]) -> f64 {
        assert!(!future.is_empty(), "iteration value over empty rewards");
        match self {
            QAggregator::MaxOfAverages => {
                let mut best = f64::NEG_INFINITY;
                let mut sum = 0.0;
                for (i, r) in future.iter().enumerate() {
                    sum += r;
                    let avg = sum / (i + 1) as f64;
                    if avg > best {
                        best = avg;
                    }
                }
                best
            }
            QAggregator::Mean => future.iter().sum::<f64>() / future.len() as f64,
            QAggregator::Max => future.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            QAggregator::Sum => future.iter().sum(),
        }
    }

    /// Combine per-iteration values recorded on an edge into its Q estimate.
    pub fn combine_history(&self, history: &[f64]) -> f64 {
        assert!(!history.is_empty(), "combine over empty history");
        match self {
            QAggregator::MaxOfAverages | QAggregator::Max => {
                history.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
            QAggregator::Mean | QAggregator::Sum => {
                history.iter().sum::<f64>() / history.len() as f64
            }
        }
    }
}

impl std::str::FromStr for QAggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_of_averages" | "max-of-averages" => Ok(QAggregator::MaxOfAverages),
            "mean" => Ok(QAggregator::Mean),
            "max" => Ok(QAggregator::Max),
            "sum" => Ok(QAggregator::Sum),
            other => Err(Error::Config(format!("unknown aggregator {other:?}"))),
        }
    }
}

/// Which root-to-terminal trace a finished search reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracePolicy {
    /// The recorded iteration with the highest total path reward.
    #[default]
    BestIteration,
    /// Walk argmax-Q from the root over visited edges.
    GreedyQ,
    /// Root path of the most visited terminal node.
    MostVisitedLeaf,
}

impl std::str::FromStr for TracePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best_iteration" | "best-iteration" => Ok(TracePolicy::BestIteration),
            "greedy_q" | "greedy-q" => Ok(TracePolicy::GreedyQ),
            "most_visited_leaf" | "most-visited-leaf" => Ok(TracePolicy::MostVisitedLeaf),
            other => Err(Error::Config(format!("unknown trace policy {other:?}"))),
        }
    }
}

/// How selection treats edges whose child has never been visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnvisitedRule {
    /// Among unvisited edges pick the one with the highest fast reward;
    /// the prior guides exploration under small iteration budgets.
    #[default]
    PriorFastReward,
    /// All unvisited edges score infinite UCT; ties go to the lowest index.
    InfiniteUct,
}

/// Search parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Number of roll-outs.
    pub n_iterations: usize,
    /// Exploration weight `w` in the UCT rule.
    pub exploration_weight: f64,
    /// Actions sampled per expansion (`d`).
    pub branch_factor: usize,
    /// Maximum trace length (`L`); nodes at this depth are terminal.
    pub depth_limit: usize,
    pub q_aggregator: QAggregator,
    pub trace_policy: TracePolicy,
    #[serde(default)]
    pub unvisited_rule: UnvisitedRule,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_iterations: 10,
            exploration_weight: 1.0,
            branch_factor: 4,
            depth_limit: 6,
            q_aggregator: QAggregator::default(),
            trace_policy: TracePolicy::default(),
            unvisited_rule: UnvisitedRule::default(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.branch_factor < 1 {
            return Err(Error::InvalidConfig("branch_factor must be >= 1".into()));
        }
        if self.depth_limit < 1 {
            return Err(Error::InvalidConfig("depth_limit must be >= 1".into()));
        }
        if !(self.exploration_weight >= 0.0) || !self.exploration_weight.is_finite() {
            return Err(Error::InvalidConfig(
                "exploration_weight must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// UCT score of an edge: `q + w * sqrt(ln(parent_visits) / child_visits)`.
///
/// An unvisited child scores positive infinity, forcing exploration when
/// fast-reward preselection is disabled. Requires `parent_visits >= 1`.
pub fn uct_score(q: f64, parent_visits: u64, child_visits: u64, w: f64) -> f64 {
    debug_assert!(parent_visits >= 1);
    if child_visits == 0 {
        return f64::INFINITY;
    }
    q + w * ((parent_visits as f64).ln() / child_visits as f64).sqrt()
}

/// One step of a completed trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<S, A> {
    pub state: S,
    pub action: A,
    pub full_reward: f64,
}

/// A root-to-terminal path: interleaved states and actions plus the terminal
/// state. Never longer than the depth limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<S, A> {
    pub steps: Vec<TraceStep<S, A>>,
    pub terminal_state: S,
    pub total_reward: f64,
}

impl<S, A> Trace<S, A> {
    pub fn new(steps: Vec<TraceStep<S, A>>, terminal_state: S) -> Self {
        let total_reward = steps.iter().map(|s| s.full_reward).sum();
        Self {
            steps,
            terminal_state,
            total_reward,
        }
    }

    pub fn per_step_rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.full_reward).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uct_matches_direct_evaluation() {
        let v = uct_score(0.5, 4, 1, 1.0);
        assert_relative_eq!(v, 1.677410022515474691, epsilon = 1e-12);
    }

    #[test]
    fn uct_zero_weight_disables_exploration() {
        assert_eq!(uct_score(0.9, 10, 3, 0.0), 0.9);
    }

    #[test]
    fn uct_unvisited_child_is_infinite() {
        assert_eq!(uct_score(0.2, 5, 0, 1.0), f64::INFINITY);
    }

    #[test]
    fn uct_monotonicity() {
        // Strictly decreasing in child visits, strictly increasing in q.
        let base = uct_score(0.5, 100, 5, 1.0);
        assert!(uct_score(0.5, 100, 6, 1.0) < base);
        assert!(uct_score(0.6, 100, 5, 1.0) > base);
    }

    #[test]
    fn max_of_averages_iteration_value() {
        // avg horizons of [0.2, 0.8, 0.5]: 0.2, 0.5, 0.5 -> max 0.5.
        let v = QAggregator::MaxOfAverages.iteration_value(&[0.2, 0.8, 0.5]);
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn history_outer_rules() {
        assert_eq!(
            QAggregator::MaxOfAverages.combine_history(&[0.4, 0.6]),
            0.6
        );
        assert_eq!(QAggregator::Mean.combine_history(&[0.4, 0.6]), 0.5);
        assert_eq!(QAggregator::Max.combine_history(&[0.4, 0.6]), 0.6);
        assert_eq!(QAggregator::Sum.combine_history(&[1.0, 3.0]), 2.0);
    }

    #[test]
    fn single_reward_value_is_identity_for_all_aggregators() {
        for agg in [
            QAggregator::MaxOfAverages,
            QAggregator::Mean,
            QAggregator::Max,
            QAggregator::Sum,
        ] {
            assert_eq!(agg.iteration_value(&[0.7]), 0.7);
        }
    }

    #[test]
    fn config_validation() {
        let mut config = SearchConfig::default();
        assert!(config.validate().is_ok());
        config.branch_factor = 0;
        assert!(config.validate().is_err());
        config.branch_factor = 1;
        config.exploration_weight = -0.1;
        assert!(config.validate().is_err());
        config.exploration_weight = 0.0;
        config.depth_limit = 0;
        assert!(config.validate().is_err());
    }
}
