//! Monte Carlo tree search over pluggable reasoning MDPs.
//!
//! The engine in [`search`] is parameterized over three contracts — a world
//! model, an action-proposing policy and a reward function ([`contracts`]) —
//! and drives them with UCT selection, greedy roll-outs and reward
//! back-propagation. Three complete domains ship with the crate:
//!
//! * [`blocksworld`] — block rearrangement planning with an exact symbolic
//!   simulator, goal-fraction and action-likelihood rewards, and adaptive
//!   few-shot prompt construction;
//! * [`math`] — arithmetic word problems solved by subquestion
//!   decomposition with confidence and self-evaluation rewards, plus
//!   reward-weighted answer aggregation;
//! * [`logic`] — rule-based deduction over unary ontologies with symbolic
//!   proof checking and a seeded problem generator.
//!
//! Text generation is abstracted behind [`backend::TextBackend`] with a
//! deterministic scripted mock and an HTTP client for completion endpoints.
//! [`oracles`] provides brute-force ground truth (optimal plans, exact Q
//! tables, forward-chaining proofs) used by the test and acceptance suites,
//! and [`harness`] runs single problems, benchmark suites and reward
//! ablations with machine-readable reports.

pub mod backend;
pub mod blocksworld;
pub mod contracts;
pub mod error;
pub mod harness;
pub mod logic;
pub mod math;
pub mod oracles;
pub mod search;
pub mod template;

pub use error::{Error, Result};
