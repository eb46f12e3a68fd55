//! Contract implementations for the block rearrangement domain: exact
//! symbolic world model, full valid-action enumeration as the policy, and a
//! reward combining action likelihood (r1), goal-progress heuristic (r2) and
//! self-evaluation (r3).

use std::sync::Arc;

use super::problem::{goal_fraction, BlocksProblem, GoalCondition};
use super::prompt::BlocksPrompts;
use super::state::{apply, valid_actions, BlockAction, BlockState};
use crate::backend::TextBackend;
use crate::contracts::{
    self, Policy, ProposedAction, RewardFunction, SelfEvalMode, StepContext, WorldModel,
};
use crate::error::{Error, Result};

/// Reward toggles and weights.
///
/// The heuristic component is `beta * goal_fraction(next)`, replaced by
/// `goal_bonus` when every condition is met so a completed plan dominates
/// any non-goal path. Likelihood is a log-space score added with weight
/// `lambda`. Because the symbolic simulator makes next states cheap, every
/// enabled component participates in the fast reward as well.
#[derive(Debug, Clone)]
pub struct BlocksRewardConfig {
    pub use_likelihood: bool,
    pub use_heuristic: bool,
    pub use_self_eval: bool,
    pub lambda: f64,
    pub beta: f64,
    pub goal_bonus: f64,
}

impl Default for BlocksRewardConfig {
    fn default() -> Self {
        Self {
            use_likelihood: false,
            use_heuristic: true,
            use_self_eval: false,
            lambda: 1.0,
            beta: 1.0,
            goal_bonus: 100.0,
        }
    }
}

impl BlocksRewardConfig {
    pub fn toggles(r1: bool, r2: bool, r3: bool) -> Self {
        Self {
            use_likelihood: r1,
            use_heuristic: r2,
            use_self_eval: r3,
            ..Self::default()
        }
    }
}

/// Goal-progress heuristic (r2): scaled fraction of conditions met by the
/// next state, or the goal bonus when all of them are.
pub fn heuristic_reward(
    _prev: &BlockState,
    _action: &BlockAction,
    next: &BlockState,
    goal: &[GoalCondition],
    beta: f64,
    goal_bonus: f64,
) -> Result<f64> {
    let fraction = goal_fraction(next, goal)?;
    if fraction >= 1.0 {
        Ok(goal_bonus)
    } else {
        Ok(beta * fraction)
    }
}

/// The blocksworld domain bundle: implements all three contracts.
pub struct BlocksDomain {
    pub problem: BlocksProblem,
    pub prompts: BlocksPrompts,
    pub reward: BlocksRewardConfig,
    backend: Option<Arc<dyn TextBackend>>,
}

impl BlocksDomain {
    pub fn symbolic(problem: BlocksProblem) -> Self {
        Self {
            problem,
            prompts: BlocksPrompts::default(),
            reward: BlocksRewardConfig::default(),
            backend: None,
        }
    }

    pub fn with_backend(mut self, backend: Arc<dyn TextBackend>) -> Self {
        self.backend = Some(backend);
        self
    }

    pub fn with_reward(mut self, reward: BlocksRewardConfig) -> Self {
        self.reward = reward;
        self
    }

    pub fn with_prompts(mut self, prompts: BlocksPrompts) -> Self {
        self.prompts = prompts;
        self
    }

    fn backend(&self) -> Result<&Arc<dyn TextBackend>> {
        self.backend.as_ref().ok_or_else(|| {
            Error::Config("likelihood/self-eval rewards need a text backend".into())
        })
    }

    /// Action likelihood (r1): the action's log probability under the
    /// few-shot prompt with `state` presented as a fresh initial state
    /// (demonstrations truncated to the remaining depth).
    pub fn action_likelihood(
        &self,
        state: &BlockState,
        action: &BlockAction,
        depth: usize,
    ) -> Result<f64> {
        let prompt = self.prompts.likelihood.build(&self.problem, state, depth);
        self.backend()?
            .score_continuation(&prompt, &action.to_string())
    }

    /// Self-evaluation (r3): renormalized Yes probability for the step.
    pub fn self_eval(&self, state: &BlockState, action: &BlockAction) -> Result<f64> {
        let prompt = self
            .prompts
            .self_eval_prompt(&self.problem, state, action)?;
        contracts::self_eval_reward(self.backend()?, &prompt, SelfEvalMode::Renormalized)
    }

    fn combined_reward(
        &self,
        state: &BlockState,
        action: &BlockAction,
        next: &BlockState,
        ctx: &StepContext,
    ) -> Result<f64> {
        let mut total = 0.0;
        if self.reward.use_likelihood {
            total += self.reward.lambda * self.action_likelihood(state, action, ctx.depth)?;
        }
        if self.reward.use_heuristic {
            total += heuristic_reward(
                state,
                action,
                next,
                &self.problem.goal,
                self.reward.beta,
                self.reward.goal_bonus,
            )?;
        }
        if self.reward.use_self_eval {
            total += self.self_eval(state, action)?;
        }
        Ok(total)
    }
}

impl WorldModel<BlockState, BlockAction> for BlocksDomain {
    fn next_state(&self, state: &BlockState, action: &BlockAction, _ctx: &StepContext) -> Result<BlockState> {
        apply(state, action)
    }

    fn is_terminal(&self, state: &BlockState, _depth: usize) -> bool {
        self.problem.satisfied(state)
    }
}

impl Policy<BlockState, BlockAction> for BlocksDomain {
    fn propose_actions(
        &self,
        state: &BlockState,
        _ctx: &StepContext,
        _d: usize,
    ) -> Result<Vec<ProposedAction<BlockAction>>> {
        let actions = valid_actions(state);
        let log_prob = -(actions.len().max(1) as f64).ln();
        Ok(actions
            .into_iter()
            .map(|a| ProposedAction::new(a, log_prob))
            .collect())
    }
}

impl RewardFunction<BlockState, BlockAction> for BlocksDomain {
    fn fast_reward(&self, state: &BlockState, action: &BlockAction, ctx: &StepContext) -> Result<f64> {
        let next = apply(state, action)?;
        self.combined_reward(state, action, &next, ctx)
    }

    fn full_reward(
        &self,
        state: &BlockState,
        action: &BlockAction,
        next: &BlockState,
        ctx: &StepContext,
    ) -> Result<f64> {
        self.combined_reward(state, action, next, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{Matcher, MockBackend, MockScript};
    use crate::blocksworld::problem::random_problem;
    use crate::blocksworld::prompt::likelihood_prompt_suffix;
    use crate::blocksworld::state::parse_state_text;
    use crate::search::{run_search, SearchConfig};

    fn simple_problem() -> BlocksProblem {
        // C on table, A on B; goal: C on A. Optimal: pick up c, stack c on a.
        BlocksProblem::from_texts(
            "the a block is clear, the c block is clear, the hand is empty, \
             the a block is on top of the b block, the b block is on the table \
             and the c block is on the table",
            "the c block is on top of the a block",
        )
        .unwrap()
    }

    #[test]
    fn heuristic_reward_values() {
        let problem = simple_problem();
        let state = problem.init.clone();
        let held = apply(&state, &BlockAction::Pickup("c".into())).unwrap();
        let done = apply(&held, &BlockAction::Stack("c".into(), "a".into())).unwrap();
        let r_mid = heuristic_reward(&state, &BlockAction::Pickup("c".into()), &held, &problem.goal, 1.0, 100.0).unwrap();
        assert_eq!(r_mid, 0.0);
        let r_done = heuristic_reward(&held, &BlockAction::Stack("c".into(), "a".into()), &done, &problem.goal, 1.0, 100.0).unwrap();
        assert_eq!(r_done, 100.0);
    }

    #[test]
    fn search_solves_two_step_problem_with_heuristic_only() {
        let domain = BlocksDomain::symbolic(simple_problem());
        let config = SearchConfig {
            n_iterations: 20,
            branch_factor: 32,
            depth_limit: 6,
            ..SearchConfig::default()
        };
        let result = run_search(
            domain.problem.init.clone(),
            &domain,
            &domain,
            &domain,
            &config,
        )
        .unwrap();
        let best = result.best.as_ref().expect("trace");
        assert!(domain.problem.satisfied(&best.terminal_state));
        assert_eq!(best.len(), 2);
    }

    #[test]
    fn likelihood_reward_reads_scripted_scores() {
        let problem = simple_problem();
        let suffix = likelihood_prompt_suffix(&problem, &problem.init);
        let script = MockScript::builder()
            .score(
                Matcher::suffix(&suffix),
                &[
                    ("pick up the c block", -0.5),
                    ("unstack the a block from on top of the b block", -4.0),
                ],
                false,
            )
            .build();
        let domain = BlocksDomain::symbolic(problem)
            .with_backend(Arc::new(MockBackend::new(script, 0)))
            .with_reward(BlocksRewardConfig::toggles(true, false, false));
        let state = domain.problem.init.clone();
        let good = domain
            .action_likelihood(&state, &BlockAction::Pickup("c".into()), 0)
            .unwrap();
        let bad = domain
            .action_likelihood(
                &state,
                &BlockAction::Unstack("a".into(), "b".into()),
                0,
            )
            .unwrap();
        assert!(good > bad);
        // Cache-free purity: same call, same value.
        assert_eq!(
            good,
            domain
                .action_likelihood(&state, &BlockAction::Pickup("c".into()), 0)
                .unwrap()
        );
    }

    #[test]
    fn script_miss_surfaces_for_unknown_action() {
        let problem = simple_problem();
        let suffix = likelihood_prompt_suffix(&problem, &problem.init);
        let script = MockScript::builder()
            .score(Matcher::suffix(&suffix), &[("pick up the c block", -0.5)], false)
            .build();
        let domain = BlocksDomain::symbolic(problem)
            .with_backend(Arc::new(MockBackend::new(script, 0)))
            .with_reward(BlocksRewardConfig::toggles(true, false, false));
        let state = domain.problem.init.clone();
        let err = domain
            .action_likelihood(&state, &BlockAction::Pickup("a".into()), 0)
            .unwrap_err();
        assert!(matches!(err, Error::ScriptMiss(_)));
    }

    #[test]
    fn policy_enumerates_valid_actions_in_order() {
        let domain = BlocksDomain::symbolic(simple_problem());
        let proposals = domain
            .propose_actions(&domain.problem.init, &StepContext::default(), 16)
            .unwrap();
        let actions: Vec<BlockAction> = proposals.iter().map(|p| p.action.clone()).collect();
        assert_eq!(actions, valid_actions(&domain.problem.init));
        assert!(proposals.iter().all(|p| p.log_prob <= 0.0));
    }

    #[test]
    fn search_never_applies_invalid_actions() {
        // The policy only proposes valid actions, so no precondition error
        // can escape the search.
        for seed in 0..20 {
            let problem = random_problem(seed, 4, 1);
            let domain = BlocksDomain::symbolic(problem);
            let config = SearchConfig {
                n_iterations: 10,
                branch_factor: 32,
                depth_limit: 6,
                ..SearchConfig::default()
            };
            run_search(
                domain.problem.init.clone(),
                &domain,
                &domain,
                &domain,
                &config,
            )
            .unwrap();
        }
    }

    #[test]
    fn terminal_iff_goal_met() {
        let domain = BlocksDomain::symbolic(simple_problem());
        assert!(!domain.is_terminal(&domain.problem.init, 0));
        let done = parse_state_text(
            "the c block is clear, the hand is empty, \
             the a block is on top of the b block, the c block is on top of the a block \
             and the b block is on the table",
        )
        .unwrap();
        // c on a satisfies the goal even while a stays on b.
        assert!(domain.is_terminal(&done, 3));
    }
}
