//! Block rearrangement problems: goals, goal scoring, file formats and a
//! seeded random generator.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::{
    apply, join_clauses, parse_state_text, random_state, valid_actions, Block, BlockState,
};
use crate::error::{Error, Result};

/// A goal condition. `On` is the primary form; `Clear` and `OnTable` are
/// accepted by the parser but considered experimental.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalCondition {
    On(Block, Block),
    Clear(Block),
    OnTable(Block),
}

impl GoalCondition {
    pub fn satisfied(&self, state: &BlockState) -> bool {
        match self {
            GoalCondition::On(x, y) => state.is_on(x, y),
            GoalCondition::Clear(x) => state.is_clear(x),
            GoalCondition::OnTable(x) => state.is_on_table(x),
        }
    }
}

impl fmt::Display for GoalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalCondition::On(x, y) => {
                write!(f, "the {x} block is on top of the {y} block")
            }
            GoalCondition::Clear(x) => write!(f, "the {x} block is clear"),
            GoalCondition::OnTable(x) => write!(f, "the {x} block is on the table"),
        }
    }
}

/// Natural-language goal text ("A and B" style).
pub fn render_goal_text(goal: &[GoalCondition]) -> String {
    let clauses: Vec<String> = goal.iter().map(|c| c.to_string()).collect();
    join_clauses(&clauses)
}

/// Parse goal text of the same clause grammar as states.
pub fn parse_goal_text(text: &str) -> Result<Vec<GoalCondition>> {
    let text = text.trim().trim_end_matches('.');
    let mut clauses: Vec<&str> = Vec::new();
    for chunk in text.split(", ") {
        let mut rest = chunk;
        while let Some(pos) = rest.find(" and the ") {
            clauses.push(&rest[..pos]);
            rest = &rest[pos + " and ".len()..];
        }
        clauses.push(rest);
    }
    clauses
        .into_iter()
        .map(|clause| {
            let body = clause
                .trim()
                .strip_prefix("the ")
                .ok_or_else(|| Error::Parse(format!("bad goal clause: {clause:?}")))?;
            if let Some((x, rest)) = body.split_once(" block is on top of the ") {
                let y = rest
                    .strip_suffix(" block")
                    .ok_or_else(|| Error::Parse(format!("bad goal clause: {clause:?}")))?;
                return Ok(GoalCondition::On(Block::new(x), Block::new(y)));
            }
            if let Some(x) = body.strip_suffix(" block is clear") {
                return Ok(GoalCondition::Clear(Block::new(x)));
            }
            if let Some(x) = body.strip_suffix(" block is on the table") {
                return Ok(GoalCondition::OnTable(Block::new(x)));
            }
            Err(Error::Parse(format!("bad goal clause: {clause:?}")))
        })
        .collect()
}

/// Fraction of goal conditions satisfied by the state.
pub fn goal_fraction(state: &BlockState, goal: &[GoalCondition]) -> Result<f64> {
    if goal.is_empty() {
        return Err(Error::EmptyGoal);
    }
    let met = goal.iter().filter(|c| c.satisfied(state)).count();
    Ok(met as f64 / goal.len() as f64)
}

/// One planning problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BlocksProblem {
    pub blocks: BTreeSet<Block>,
    pub init: BlockState,
    pub goal: Vec<GoalCondition>,
    /// Minimum plan length when known; used for grouping reports.
    pub min_steps: Option<usize>,
}

impl BlocksProblem {
    pub fn new(init: BlockState, goal: Vec<GoalCondition>) -> Self {
        Self {
            blocks: init.blocks(),
            init,
            goal,
            min_steps: None,
        }
    }

    pub fn from_texts(init_text: &str, goal_text: &str) -> Result<Self> {
        Ok(Self::new(
            parse_state_text(init_text)?,
            parse_goal_text(goal_text)?,
        ))
    }

    pub fn satisfied(&self, state: &BlockState) -> bool {
        self.goal.iter().all(|c| c.satisfied(state))
    }
}

// --- file formats -----------------------------------------------------------

/// On-disk JSON schema: predicate strings for init and goal, with an
/// optional natural-language mirror.
///
/// ```json
/// {
///   "blocks": ["red", "blue"],
///   "init": ["ontable(blue)", "on(red,blue)", "handempty"],
///   "goal": ["on(blue,red)"],
///   "min_steps": 4,
///   "init_text": "the red block is clear, ..."
/// }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub blocks: Vec<String>,
    pub init: Vec<String>,
    pub goal: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_text: Option<String>,
}

fn parse_predicate(text: &str) -> Result<(String, Vec<String>)> {
    let text = text.trim();
    match text.split_once('(') {
        None => Ok((text.to_string(), vec![])),
        Some((name, rest)) => {
            let args = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("bad predicate: {text:?}")))?;
            Ok((
                name.trim().to_string(),
                args.split(',').map(|a| a.trim().to_string()).collect(),
            ))
        }
    }
}

fn goal_from_predicate(text: &str) -> Result<GoalCondition> {
    let (name, args) = parse_predicate(text)?;
    match (name.as_str(), args.as_slice()) {
        ("on", [x, y]) => Ok(GoalCondition::On(Block::new(x), Block::new(y))),
        ("clear", [x]) => Ok(GoalCondition::Clear(Block::new(x))),
        ("ontable", [x]) | ("on-table", [x]) => Ok(GoalCondition::OnTable(Block::new(x))),
        _ => Err(Error::Parse(format!("bad goal predicate: {text:?}"))),
    }
}

impl BlocksProblem {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ProblemFile = serde_json::from_str(&text)?;
        Self::from_problem_file(&file)
    }

    pub fn from_problem_file(file: &ProblemFile) -> Result<Self> {
        let mut on = Vec::new();
        let mut table = Vec::new();
        let mut holding = None;
        for pred in &file.init {
            let (name, args) = parse_predicate(pred)?;
            match (name.as_str(), args.as_slice()) {
                ("on", [x, y]) => on.push((Block::new(x), Block::new(y))),
                ("ontable", [x]) | ("on-table", [x]) => table.push(Block::new(x)),
                ("holding", [x]) => holding = Some(Block::new(x)),
                // Derivable facts accepted for compatibility.
                ("clear", _) | ("handempty", _) | ("arm-empty", _) => {}
                _ => return Err(Error::Parse(format!("bad init predicate: {pred:?}"))),
            }
        }
        let init = BlockState::new(on, table, holding)?;
        let goal = file
            .goal
            .iter()
            .map(|g| goal_from_predicate(g))
            .collect::<Result<Vec<_>>>()?;
        let mut problem = Self::new(init, goal);
        problem.min_steps = file.min_steps;
        for name in &file.blocks {
            problem.blocks.insert(Block::new(name));
        }
        Ok(problem)
    }

    pub fn to_problem_file(&self) -> ProblemFile {
        let mut init: Vec<String> = Vec::new();
        for (x, y) in self.init.on_pairs() {
            init.push(format!("on({x},{y})"));
        }
        for x in self.init.table_blocks() {
            init.push(format!("ontable({x})"));
        }
        match self.init.holding() {
            Some(h) => init.push(format!("holding({h})")),
            None => init.push("handempty".to_string()),
        }
        let goal = self
            .goal
            .iter()
            .map(|g| match g {
                GoalCondition::On(x, y) => format!("on({x},{y})"),
                GoalCondition::Clear(x) => format!("clear({x})"),
                GoalCondition::OnTable(x) => format!("ontable({x})"),
            })
            .collect();
        ProblemFile {
            blocks: self.blocks.iter().map(|b| b.name().to_string()).collect(),
            init,
            goal,
            min_steps: self.min_steps,
            init_text: Some(super::state::render_state_text(&self.init)),
            goal_text: Some(render_goal_text(&self.goal)),
        }
    }

    /// Import the PDDL-style upstream problem format: reads the `(:init ...)`
    /// and `(:goal ...)` sections, ignoring everything else.
    pub fn from_pddl(text: &str) -> Result<Self> {
        let init_preds = pddl_section(text, ":init")?;
        let goal_preds = pddl_section(text, ":goal")?;
        let mut on = Vec::new();
        let mut table = Vec::new();
        let mut holding = None;
        for pred in init_preds {
            match (pred.0.as_str(), pred.1.as_slice()) {
                ("on", [x, y]) => on.push((Block::new(x), Block::new(y))),
                ("ontable", [x]) | ("on-table", [x]) => table.push(Block::new(x)),
                ("holding", [x]) => holding = Some(Block::new(x)),
                ("clear", _) | ("handempty", _) | ("arm-empty", _) => {}
                other => return Err(Error::Parse(format!("bad PDDL init atom: {other:?}"))),
            }
        }
        let goal = goal_preds
            .into_iter()
            .filter(|(name, _)| name != "and")
            .map(|(name, args)| match (name.as_str(), args.as_slice()) {
                ("on", [x, y]) => Ok(GoalCondition::On(Block::new(x), Block::new(y))),
                ("clear", [x]) => Ok(GoalCondition::Clear(Block::new(x))),
                ("ontable", [x]) | ("on-table", [x]) => {
                    Ok(GoalCondition::OnTable(Block::new(x)))
                }
                other => Err(Error::Parse(format!("bad PDDL goal atom: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(BlockState::new(on, table, holding)?, goal))
    }
}

/// Flat list of atoms inside a named PDDL section.
fn pddl_section(text: &str, section: &str) -> Result<Vec<(String, Vec<String>)>> {
    let start = text
        .find(section)
        .ok_or_else(|| Error::Parse(format!("PDDL input has no {section} section")))?;
    let body = &text[start + section.len()..];
    let mut atoms = Vec::new();
    let mut depth = 1usize; // inside the (:section ... ) parens
    let mut current: Option<String> = None;
    for ch in body.chars() {
        match ch {
            '(' => {
                depth += 1;
                current = Some(String::new());
            }
            ')' => {
                if let Some(atom) = current.take() {
                    let mut parts = atom.split_whitespace().map(|s| s.to_string());
                    if let Some(name) = parts.next() {
                        atoms.push((name.to_lowercase(), parts.collect()));
                    }
                }
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            _ => {
                if let Some(atom) = current.as_mut() {
                    atom.push(ch);
                }
            }
        }
    }
    Ok(atoms)
}

// --- random generation -------------------------------------------------------

pub const BLOCK_COLORS: [&str; 10] = [
    "red", "blue", "orange", "yellow", "white", "purple", "cyan", "brown", "magenta", "green",
];

/// Seeded random problem: a random reachable initial state and a goal drawn
/// from the on-relations of a random-walk target state. The goal always has
/// at least `min_goal_conditions` conditions and is not satisfied at init.
pub fn random_problem(seed: u64, n_blocks: usize, min_goal_conditions: usize) -> BlocksProblem {
    assert!((2..=BLOCK_COLORS.len()).contains(&n_blocks));
    let blocks: Vec<Block> = BLOCK_COLORS[..n_blocks].iter().map(|s| Block::new(*s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let init = random_state(&mut rng, &blocks);
        // Random walk to a target state, then read its stacking as the goal.
        let mut target = init.clone();
        let walk_len = rng.gen_range(2..=4 * n_blocks);
        for _ in 0..walk_len {
            let actions = valid_actions(&target);
            if actions.is_empty() {
                break;
            }
            let pick = rng.gen_range(0..actions.len());
            target = apply(&target, &actions[pick]).expect("valid action applies");
        }
        if target.holding().is_some() {
            // Finish the walk with the held block somewhere concrete.
            let actions = valid_actions(&target);
            let pick = rng.gen_range(0..actions.len());
            target = apply(&target, &actions[pick]).expect("valid action applies");
        }
        let goal: Vec<GoalCondition> = target
            .on_pairs()
            .map(|(x, y)| GoalCondition::On(x.clone(), y.clone()))
            .collect();
        if goal.len() < min_goal_conditions.max(1) {
            continue;
        }
        let problem = BlocksProblem::new(init, goal);
        if !problem.satisfied(&problem.init) {
            return problem;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(name: &str) -> Block {
        Block::new(name)
    }

    #[test]
    fn goal_fraction_counts_conditions() {
        let state = parse_state_text(
            "the red block is clear, the hand is empty, the red block is on top of the blue block \
             and the blue block is on the table",
        )
        .unwrap();
        let goal = vec![
            GoalCondition::On(b("red"), b("blue")),
            GoalCondition::On(b("blue"), b("red")),
        ];
        assert_eq!(goal_fraction(&state, &goal).unwrap(), 0.5);
        assert_eq!(
            goal_fraction(&state, &goal[..1].to_vec()).unwrap(),
            1.0
        );
        assert_eq!(goal_fraction(&state, &goal[1..].to_vec()).unwrap(), 0.0);
        assert!(matches!(goal_fraction(&state, &[]), Err(Error::EmptyGoal)));
    }

    #[test]
    fn goal_text_round_trip() {
        let goal = vec![
            GoalCondition::On(b("orange"), b("red")),
            GoalCondition::On(b("yellow"), b("orange")),
        ];
        let text = render_goal_text(&goal);
        assert_eq!(
            text,
            "the orange block is on top of the red block and the yellow block is on top of the orange block"
        );
        assert_eq!(parse_goal_text(&text).unwrap(), goal);
    }

    #[test]
    fn json_round_trip() {
        let problem = random_problem(3, 4, 1);
        let file = problem.to_problem_file();
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed: ProblemFile = serde_json::from_str(&text).unwrap();
        let rebuilt = BlocksProblem::from_problem_file(&parsed).unwrap();
        assert_eq!(rebuilt.init, problem.init);
        assert_eq!(rebuilt.goal, problem.goal);
    }

    #[test]
    fn pddl_import() {
        let text = r#"
(define (problem BW-rand-3)
  (:domain blocksworld-4ops)
  (:objects red blue orange)
  (:init (handempty) (ontable red) (ontable blue) (on orange red) (clear orange) (clear blue))
  (:goal (and (on red blue) (on orange red))))
"#;
        let problem = BlocksProblem::from_pddl(text).unwrap();
        assert!(problem.init.is_on(&b("orange"), &b("red")));
        assert!(problem.init.is_on_table(&b("blue")));
        assert_eq!(problem.goal.len(), 2);
    }

    #[test]
    fn random_problems_are_reachable_and_seeded() {
        let a = random_problem(11, 4, 2);
        let c = random_problem(11, 4, 2);
        assert_eq!(a, c);
        assert!(a.goal.len() >= 2);
        assert!(!a.satisfied(&a.init));
    }
}
