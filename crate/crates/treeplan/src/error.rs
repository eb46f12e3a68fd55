//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the search engine, contracts, backends and domains.
#[derive(Debug, Error)]
pub enum Error {
    // --- search engine ---
    /// The policy produced zero actions for a non-terminal state.
    #[error("policy produced no actions for a non-terminal state at depth {depth}")]
    PolicyExhausted { depth: usize },
    /// An edge on a back-propagation path has no full reward recorded.
    #[error("edge on back-propagation path is missing its full reward")]
    MissingReward,
    /// No completed root-to-terminal trace exists to extract.
    #[error("no completed trace is available")]
    BestTraceUnavailable,
    /// A search configuration field violates its invariant.
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    /// A domain error wrapped with the iteration in which it occurred.
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    // --- reward combinators ---
    /// Geometric combination over an invalid component/weight set.
    #[error("invalid reward components: {0}")]
    Domain(String),
    /// confidence_from_samples called with no samples.
    #[error("no answer samples provided")]
    EmptySamples,
    /// Yes/No next-token mass is zero on both candidates.
    #[error("degenerate yes/no distribution (zero mass on both candidates)")]
    DegenerateDistribution,

    // --- backends ---
    /// HTTP transport failed after bounded retries.
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    /// The mock script has no rule matching a prompt or continuation.
    #[error("mock script miss: {0}")]
    ScriptMiss(String),
    /// The endpoint reported a quota / rate-limit condition.
    #[error("backend quota exceeded")]
    QuotaExceeded,
    /// Neither echo-scoring nor the per-token fallback is available.
    #[error("continuation scoring unsupported by this backend")]
    ScoringUnsupported,
    /// score_continuation called with an empty continuation.
    #[error("cannot score an empty continuation")]
    EmptyContinuation,

    // --- blocksworld ---
    /// An action precondition does not hold; names the failed condition.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    /// A state / action / problem text could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    /// goal_fraction over an empty goal list.
    #[error("goal has no conditions")]
    EmptyGoal,

    // --- math ---
    /// No sampled answer contains an extractable numeral.
    #[error("no sample yields an extractable answer")]
    UnparsableAnswer,
    /// Final-answer extraction on a trace without the terminal marker.
    #[error("trace does not end with a terminal-marked step")]
    NotFinal,
    /// Aggregation over a result with no final traces.
    #[error("no final traces to aggregate")]
    NoFinalTraces,

    // --- logic ---
    /// deduce called with a rule that does not match the claim.
    #[error("rule is not applicable to the claim: {0}")]
    NotApplicable(String),

    // --- oracles ---
    /// exact_q_values aborted because the path count exceeds the bound.
    #[error("path enumeration exceeds bound of {0} paths")]
    PathBound(usize),

    // --- harness / io ---
    #[error("run config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach the iteration index to a domain error bubbling out of the engine.
    pub fn at_iteration(self, iteration: usize) -> Error {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
