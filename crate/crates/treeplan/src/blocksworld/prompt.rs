//! Few-shot prompt construction with adaptive demonstration truncation.
//!
//! The likelihood prompt is a 4-shot template whose demonstrations are parsed
//! into structured form at load time. When a prompt is built at search depth
//! `k`, each demonstration drops its first `k` steps and presents its
//! simulator-computed intermediate state as a fresh initial state, so the
//! remaining demonstration length matches the remaining search depth. A
//! demonstration shorter than `k` falls back to its full form with a warning.

use tracing::warn;

use super::problem::{parse_goal_text, render_goal_text, BlocksProblem, GoalCondition};
use super::state::{apply, parse_state_text, render_state_text, BlockAction, BlockState};
use crate::error::{Error, Result};
use crate::template::Template;

const LIKELIHOOD_TEMPLATE: &str =
    include_str!("../../templates/blocksworld_likelihood.txt");
const WORLD_TEMPLATE: &str = include_str!("../../templates/blocksworld_world.txt");
const SELF_EVAL_TEMPLATE: &str =
    include_str!("../../templates/blocksworld_self_eval.txt");

/// A worked example: problem text, plan, and all intermediate states.
#[derive(Debug, Clone)]
pub struct Demonstration {
    pub init_text: String,
    pub goal_text: String,
    pub init: BlockState,
    pub goal: Vec<GoalCondition>,
    pub plan: Vec<BlockAction>,
    /// `states[k]` is the state after the first `k` plan steps.
    pub states: Vec<BlockState>,
}

impl Demonstration {
    pub fn new(init_text: &str, goal_text: &str, plan_lines: &[&str]) -> Result<Self> {
        let init = parse_state_text(init_text)?;
        let goal = parse_goal_text(goal_text)?;
        let plan: Vec<BlockAction> = plan_lines
            .iter()
            .map(|l| BlockAction::parse(l))
            .collect::<Result<_>>()?;
        let mut states = vec![init.clone()];
        for action in &plan {
            states.push(apply(states.last().unwrap(), action)?);
        }
        Ok(Self {
            init_text: init_text.to_string(),
            goal_text: goal_text.to_string(),
            init,
            goal,
            plan,
            states,
        })
    }

    /// Demonstration block truncated by `depth` leading steps. Returns the
    /// fallback flag when the demo is too short to truncate.
    fn render(&self, depth: usize) -> (String, bool) {
        let (init_line, plan, fallback) = if depth == 0 {
            (self.init_text.clone(), self.plan.clone(), false)
        } else if depth >= self.plan.len() {
            (self.init_text.clone(), self.plan.clone(), true)
        } else {
            (
                render_state_text(&self.states[depth]),
                self.plan[depth..].to_vec(),
                false,
            )
        };
        let plan_lines: Vec<String> = plan.iter().map(|a| a.to_string()).collect();
        let block = format!(
            "[STATEMENT]\nAs initial conditions I have that, {}.\nMy goal is to have that {}.\n\nMy plan is as follows:\n\n[PLAN]\n{}\n[PLAN END]\n\n",
            init_line,
            self.goal_text,
            plan_lines.join("\n"),
        );
        (block, fallback)
    }
}

/// The parsed likelihood prompt: instruction preamble, demonstrations, and
/// the final query block (still carrying its placeholders).
#[derive(Debug, Clone)]
pub struct LikelihoodPrompt {
    preamble: String,
    pub demos: Vec<Demonstration>,
    query: String,
}

impl LikelihoodPrompt {
    /// Parse a 4-shot template of the shipped shape.
    pub fn parse(template: &str) -> Result<Self> {
        let mut parts = template.split("[STATEMENT]\n");
        let preamble = parts
            .next()
            .ok_or_else(|| Error::Parse("empty likelihood template".into()))?
            .to_string();
        let mut blocks: Vec<&str> = parts.collect();
        let query = blocks
            .pop()
            .ok_or_else(|| Error::Parse("likelihood template has no query block".into()))?
            .to_string();
        if !query.contains("<initial_state>") || !query.contains("<goals>") {
            return Err(Error::Parse(
                "query block must contain <initial_state> and <goals>".into(),
            ));
        }
        let mut demos = Vec::new();
        for block in blocks {
            demos.push(parse_demo_block(block)?);
        }
        Ok(Self {
            preamble,
            demos,
            query,
        })
    }

    pub fn embedded() -> Self {
        Self::parse(LIKELIHOOD_TEMPLATE).expect("embedded template parses")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Build the full prompt: demonstrations truncated by `depth`, then the
    /// query with `state` presented as a fresh initial state.
    pub fn build(&self, problem: &BlocksProblem, state: &BlockState, depth: usize) -> String {
        let mut out = self.preamble.clone();
        for (i, demo) in self.demos.iter().enumerate() {
            let (block, fallback) = demo.render(depth);
            if fallback {
                warn!(
                    demo = i,
                    depth,
                    plan_len = demo.plan.len(),
                    "demonstration too short to truncate; using full demo"
                );
            }
            out.push_str(&block);
        }
        let query = self
            .query
            .replace("<initial_state>", &format!("{}.", render_state_text(state)))
            .replace("<goals>", &render_goal_text(&problem.goal));
        out.push_str("[STATEMENT]\n");
        out.push_str(&query);
        out
    }
}

fn parse_demo_block(block: &str) -> Result<Demonstration> {
    let lines: Vec<&str> = block.lines().collect();
    let init_text = lines
        .first()
        .and_then(|l| l.strip_prefix("As initial conditions I have that, "))
        .and_then(|l| l.strip_suffix('.'))
        .ok_or_else(|| Error::Parse(format!("bad demo init line: {:?}", lines.first())))?;
    let goal_text = lines
        .get(1)
        .and_then(|l| l.strip_prefix("My goal is to have that "))
        .and_then(|l| l.strip_suffix('.'))
        .ok_or_else(|| Error::Parse(format!("bad demo goal line: {:?}", lines.get(1))))?;
    let plan_start = lines
        .iter()
        .position(|l| *l == "[PLAN]")
        .ok_or_else(|| Error::Parse("demo without [PLAN]".into()))?;
    let plan_end = lines
        .iter()
        .position(|l| *l == "[PLAN END]")
        .ok_or_else(|| Error::Parse("demo without [PLAN END]".into()))?;
    Demonstration::new(init_text, goal_text, &lines[plan_start + 1..plan_end])
}

/// Prompt set for the blocksworld domain.
#[derive(Debug, Clone)]
pub struct BlocksPrompts {
    pub likelihood: LikelihoodPrompt,
    pub world: Template,
    pub self_eval: Template,
}

impl Default for BlocksPrompts {
    fn default() -> Self {
        Self {
            likelihood: LikelihoodPrompt::embedded(),
            world: Template::new(WORLD_TEMPLATE),
            self_eval: Template::new(SELF_EVAL_TEMPLATE),
        }
    }
}

impl BlocksPrompts {
    /// Load `blocksworld_likelihood.txt`, `blocksworld_world.txt` and
    /// `blocksworld_self_eval.txt` from a directory.
    pub fn from_dir(dir: impl AsRef<std::path::Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            likelihood: LikelihoodPrompt::load(dir.join("blocksworld_likelihood.txt"))?,
            world: Template::load(dir.join("blocksworld_world.txt"))?,
            self_eval: Template::load(dir.join("blocksworld_self_eval.txt"))?,
        })
    }

    /// State-transition prompt for a (state, action) pair.
    pub fn world_prompt(&self, state: &BlockState, action: &BlockAction) -> Result<String> {
        self.world.render(&[
            ("state", &format!("I have that, {}.", render_state_text(state))),
            ("action", &action.sentence()),
        ])
    }

    /// Yes/No judgment prompt for a proposed action.
    pub fn self_eval_prompt(
        &self,
        problem: &BlocksProblem,
        state: &BlockState,
        action: &BlockAction,
    ) -> Result<String> {
        self.self_eval.render(&[
            ("state", &render_state_text(state)),
            ("goals", &render_goal_text(&problem.goal)),
            ("action", &action.to_string()),
        ])
    }
}

/// The suffix of the likelihood prompt that identifies one (state, goal)
/// query independently of demonstration truncation. Used by scripted mocks.
pub fn likelihood_prompt_suffix(problem: &BlocksProblem, state: &BlockState) -> String {
    format!(
        "[STATEMENT]\nAs initial conditions I have that, {}.\nMy goal is to have that {}.\n\nMy plan is as follows:\n\n[PLAN]\n",
        render_state_text(state),
        render_goal_text(&problem.goal),
    )
}
