//! Block rearrangement planning: exact symbolic world model, valid-action
//! generation, goal-fraction and action-likelihood rewards, and few-shot
//! prompt rendering with adaptive truncation.

pub mod domain;
pub mod problem;
pub mod prompt;
pub mod state;

pub use domain::{heuristic_reward, BlocksDomain, BlocksRewardConfig};
pub use problem::{
    goal_fraction, parse_goal_text, random_problem, render_goal_text, BlocksProblem,
    GoalCondition, ProblemFile,
};
pub use prompt::{likelihood_prompt_suffix, BlocksPrompts, Demonstration, LikelihoodPrompt};
pub use state::{
    apply, parse_state_text, render_state_text, valid_actions, Block, BlockAction, BlockState,
};
