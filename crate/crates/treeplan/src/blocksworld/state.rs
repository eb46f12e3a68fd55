//! Exact symbolic block world: states, the four actions, STRIPS-style
//! transition semantics, and the natural-language state rendering used in
//! prompts (round-trips through the parser).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A block name ("red", "blue", ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Block(pub String);

impl Block {
    pub fn new(name: impl Into<String>) -> Self {
        Block(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Block {
    fn from(s: &str) -> Self {
        Block(s.to_string())
    }
}

/// A block configuration. Every block rests on exactly one support: another
/// block, the table, or the hand (at most one block held).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockState {
    /// x -> y: block x sits on top of block y.
    on: BTreeMap<Block, Block>,
    on_table: BTreeSet<Block>,
    holding: Option<Block>,
}

impl BlockState {
    pub fn new(
        on: impl IntoIterator<Item = (Block, Block)>,
        on_table: impl IntoIterator<Item = Block>,
        holding: Option<Block>,
    ) -> Result<Self> {
        let state = Self {
            on: on.into_iter().collect(),
            on_table: on_table.into_iter().collect(),
            holding,
        };
        state.check_invariants()?;
        Ok(state)
    }

    fn check_invariants(&self) -> Result<()> {
        // Supports are a partition of the block set.
        for x in self.on.keys() {
            if self.on_table.contains(x) {
                return Err(Error::Parse(format!(
                    "block {x} is both stacked and on the table"
                )));
            }
            if self.holding.as_ref() == Some(x) {
                return Err(Error::Parse(format!("block {x} is both stacked and held")));
            }
        }
        if let Some(h) = &self.holding {
            if self.on_table.contains(h) {
                return Err(Error::Parse(format!(
                    "block {h} is both held and on the table"
                )));
            }
        }
        // At most one block per support.
        let mut supports: BTreeSet<&Block> = BTreeSet::new();
        for y in self.on.values() {
            if !supports.insert(y) {
                return Err(Error::Parse(format!("two blocks on top of {y}")));
            }
            if self.holding.as_ref() == Some(y) {
                return Err(Error::Parse(format!("block on top of held block {y}")));
            }
        }
        // No cycles: walking down from any block reaches the table.
        for start in self.on.keys() {
            let mut current = start;
            let mut hops = 0;
            while let Some(below) = self.on.get(current) {
                current = below;
                hops += 1;
                if hops > self.on.len() {
                    return Err(Error::Parse(format!("cycle in on-relation at {start}")));
                }
            }
            if !self.on_table.contains(current) {
                return Err(Error::Parse(format!(
                    "stack under {start} does not rest on the table"
                )));
            }
        }
        Ok(())
    }

    /// All blocks present in the state.
    pub fn blocks(&self) -> BTreeSet<Block> {
        let mut set: BTreeSet<Block> = BTreeSet::new();
        set.extend(self.on.keys().cloned());
        set.extend(self.on.values().cloned());
        set.extend(self.on_table.iter().cloned());
        set.extend(self.holding.clone());
        set
    }

    pub fn holding(&self) -> Option<&Block> {
        self.holding.as_ref()
    }

    pub fn hand_empty(&self) -> bool {
        self.holding.is_none()
    }

    pub fn is_on(&self, x: &Block, y: &Block) -> bool {
        self.on.get(x) == Some(y)
    }

    pub fn is_on_table(&self, x: &Block) -> bool {
        self.on_table.contains(x)
    }

    pub fn on_pairs(&self) -> impl Iterator<Item = (&Block, &Block)> {
        self.on.iter().map(|(x, y)| (x, y))
    }

    pub fn table_blocks(&self) -> impl Iterator<Item = &Block> {
        self.on_table.iter()
    }

    /// A block is clear iff nothing is on it and it is not held.
    pub fn is_clear(&self, x: &Block) -> bool {
        self.holding.as_ref() != Some(x) && !self.on.values().any(|y| y == x)
    }

    /// Derived clear set in name order.
    pub fn clear_blocks(&self) -> BTreeSet<Block> {
        self.blocks()
            .into_iter()
            .filter(|b| self.is_clear(b))
            .collect()
    }
}

/// One of the four block-moving actions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BlockAction {
    Pickup(Block),
    Unstack(Block, Block),
    Put(Block),
    Stack(Block, Block),
}

impl fmt::Display for BlockAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockAction::Pickup(x) => write!(f, "pick up the {x} block"),
            BlockAction::Put(x) => write!(f, "put down the {x} block"),
            BlockAction::Stack(x, y) => {
                write!(f, "stack the {x} block on top of the {y} block")
            }
            BlockAction::Unstack(x, y) => {
                write!(f, "unstack the {x} block from on top of the {y} block")
            }
        }
    }
}

impl BlockAction {
    /// Capitalized sentence form used in state-transition prompts
    /// ("Pick up the brown block.").
    pub fn sentence(&self) -> String {
        let text = self.to_string();
        let mut chars = text.chars();
        match chars.next() {
            Some(first) => format!("{}{}.", first.to_uppercase(), chars.as_str()),
            None => text,
        }
    }

    /// Parse the lowercase action rendering.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim().trim_end_matches('.');
        if let Some(rest) = text.strip_prefix("pick up the ") {
            let x = rest
                .strip_suffix(" block")
                .ok_or_else(|| Error::Parse(format!("bad action: {text:?}")))?;
            return Ok(BlockAction::Pickup(Block::new(x)));
        }
        if let Some(rest) = text.strip_prefix("put down the ") {
            let x = rest
                .strip_suffix(" block")
                .ok_or_else(|| Error::Parse(format!("bad action: {text:?}")))?;
            return Ok(BlockAction::Put(Block::new(x)));
        }
        if let Some(rest) = text.strip_prefix("stack the ") {
            let (x, y) = split_pair(rest, " block on top of the ", text)?;
            return Ok(BlockAction::Stack(x, y));
        }
        if let Some(rest) = text.strip_prefix("unstack the ") {
            let (x, y) = split_pair(rest, " block from on top of the ", text)?;
            return Ok(BlockAction::Unstack(x, y));
        }
        Err(Error::Parse(format!("bad action: {text:?}")))
    }
}

fn split_pair(rest: &str, separator: &str, full: &str) -> Result<(Block, Block)> {
    let (x, tail) = rest
        .split_once(separator)
        .ok_or_else(|| Error::Parse(format!("bad action: {full:?}")))?;
    let y = tail
        .strip_suffix(" block")
        .ok_or_else(|| Error::Parse(format!("bad action: {full:?}")))?;
    Ok((Block::new(x), Block::new(y)))
}

/// Exactly the STRIPS-valid moves, in deterministic order: pick-ups, then
/// unstacks, then put-down, then stacks, each sorted by block name.
pub fn valid_actions(state: &BlockState) -> Vec<BlockAction> {
    let mut actions = Vec::new();
    match state.holding() {
        None => {
            for x in state.table_blocks() {
                if state.is_clear(x) {
                    actions.push(BlockAction::Pickup(x.clone()));
                }
            }
            for (x, y) in state.on_pairs() {
                if state.is_clear(x) {
                    actions.push(BlockAction::Unstack(x.clone(), y.clone()));
                }
            }
        }
        Some(held) => {
            actions.push(BlockAction::Put(held.clone()));
            for y in state.blocks() {
                if y != *held && state.is_clear(&y) {
                    actions.push(BlockAction::Stack(held.clone(), y));
                }
            }
        }
    }
    actions
}

/// Apply an action under add/delete semantics. Fails with the violated
/// precondition when the action is not valid in `state`.
pub fn apply(state: &BlockState, action: &BlockAction) -> Result<BlockState> {
    let mut next = state.clone();
    match action {
        BlockAction::Pickup(x) => {
            if !state.hand_empty() {
                return Err(Error::PreconditionViolated("hand is empty".into()));
            }
            if !state.is_on_table(x) {
                return Err(Error::PreconditionViolated(format!(
                    "the {x} block is on the table"
                )));
            }
            if !state.is_clear(x) {
                return Err(Error::PreconditionViolated(format!(
                    "the {x} block is clear"
                )));
            }
            next.on_table.remove(x);
            next.holding = Some(x.clone());
        }
        BlockAction::Unstack(x, y) => {
            if !state.hand_empty() {
                return Err(Error::PreconditionViolated("hand is empty".into()));
            }
            if !state.is_on(x, y) {
                return Err(Error::PreconditionViolated(format!(
                    "the {x} block is on top of the {y} block"
                )));
            }
            if !state.is_clear(x) {
                return Err(Error::PreconditionViolated(format!(
                    "the {x} block is clear"
                )));
            }
            next.on.remove(x);
            next.holding = Some(x.clone());
        }
        BlockAction::Put(x) => {
            if state.holding() != Some(x) {
                return Err(Error::PreconditionViolated(format!(
                    "holding the {x} block"
                )));
            }
            next.holding = None;
            next.on_table.insert(x.clone());
        }
        BlockAction::Stack(x, y) => {
            if state.holding() != Some(x) {
                return Err(Error::PreconditionViolated(format!(
                    "holding the {x} block"
                )));
            }
            if !state.is_clear(y) {
                return Err(Error::PreconditionViolated(format!(
                    "the {y} block is clear"
                )));
            }
            next.holding = None;
            next.on.insert(x.clone(), y.clone());
        }
    }
    next.check_invariants()?;
    Ok(next)
}

/// Render the state as the canonical clause list: clear conditions, hand,
/// on-relations, table positions; clauses joined with ", " and a final
/// " and ". No trailing period.
pub fn render_state_text(state: &BlockState) -> String {
    let mut clauses: Vec<String> = Vec::new();
    for x in state.clear_blocks() {
        clauses.push(format!("the {x} block is clear"));
    }
    match state.holding() {
        Some(h) => {
            clauses.push(format!("the {h} block is in the hand"));
            clauses.push(format!("the hand is holding the {h} block"));
        }
        None => clauses.push("the hand is empty".to_string()),
    }
    for (x, y) in state.on_pairs() {
        clauses.push(format!("the {x} block is on top of the {y} block"));
    }
    for x in state.table_blocks() {
        clauses.push(format!("the {x} block is on the table"));
    }
    join_clauses(&clauses)
}

pub(crate) fn join_clauses(clauses: &[String]) -> String {
    match clauses.len() {
        0 => String::new(),
        1 => clauses[0].clone(),
        n => format!("{} and {}", clauses[..n - 1].join(", "), clauses[n - 1]),
    }
}

/// Parse a clause list back into a state. Clauses may appear in any order;
/// declared clear facts are checked against the derived clear set.
pub fn parse_state_text(text: &str) -> Result<BlockState> {
    let text = text.trim().trim_end_matches('.');
    let mut clauses: Vec<&str> = Vec::new();
    for chunk in text.split(", ") {
        // The final chunk joins its last two clauses with " and ".
        let mut rest = chunk;
        while let Some(pos) = rest.find(" and the ") {
            clauses.push(&rest[..pos]);
            rest = &rest[pos + " and ".len()..];
        }
        clauses.push(rest);
    }
    let mut on: Vec<(Block, Block)> = Vec::new();
    let mut table: Vec<Block> = Vec::new();
    let mut declared_clear: BTreeSet<Block> = BTreeSet::new();
    let mut in_hand: Option<Block> = None;
    let mut held: Option<Block> = None;
    let mut hand_empty = false;
    for clause in clauses {
        let clause = clause.trim();
        if clause.is_empty() {
            continue;
        }
        if clause == "the hand is empty" {
            hand_empty = true;
            continue;
        }
        if let Some(x) = clause
            .strip_prefix("the hand is holding the ")
            .and_then(|r| r.strip_suffix(" block"))
        {
            held = Some(Block::new(x));
            continue;
        }
        if let Some(body) = clause.strip_prefix("the ") {
            if let Some(x) = body.strip_suffix(" block is clear") {
                declared_clear.insert(Block::new(x));
                continue;
            }
            if let Some(x) = body.strip_suffix(" block is in the hand") {
                in_hand = Some(Block::new(x));
                continue;
            }
            if let Some(x) = body.strip_suffix(" block is on the table") {
                table.push(Block::new(x));
                continue;
            }
            if let Some((x, y)) = body
                .split_once(" block is on top of the ")
                .and_then(|(x, rest)| rest.strip_suffix(" block").map(|y| (x, y)))
            {
                on.push((Block::new(x), Block::new(y)));
                continue;
            }
        }
        return Err(Error::Parse(format!("unrecognized clause: {clause:?}")));
    }
    match (&in_hand, &held) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Parse(format!(
                "hand clauses disagree: {a} vs {b}"
            )))
        }
        _ => {}
    }
    let holding = in_hand.or(held);
    if hand_empty && holding.is_some() {
        return Err(Error::Parse(
            "hand is declared empty but also holding a block".into(),
        ));
    }
    let state = BlockState::new(on, table, holding)?;
    let derived = state.clear_blocks();
    if declared_clear != derived {
        return Err(Error::Parse(format!(
            "clear clauses {declared_clear:?} disagree with derived {derived:?}"
        )));
    }
    Ok(state)
}

/// Seeded random reachable state over the given blocks (hand empty).
pub fn random_state<R: rand::Rng>(rng: &mut R, blocks: &[Block]) -> BlockState {
    let mut order: Vec<Block> = blocks.to_vec();
    // Fisher-Yates with the caller's RNG for determinism.
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut on: Vec<(Block, Block)> = Vec::new();
    let mut table: Vec<Block> = Vec::new();
    let mut tops: Vec<Block> = Vec::new();
    for block in order {
        if tops.is_empty() || rng.gen_bool(0.5) {
            table.push(block.clone());
        } else {
            let target = rng.gen_range(0..tops.len());
            on.push((block.clone(), tops.remove(target)));
        }
        tops.push(block);
    }
    BlockState::new(on, table, None).expect("constructed state is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn b(name: &str) -> Block {
        Block::new(name)
    }

    fn two_on_table() -> BlockState {
        BlockState::new([], [b("a"), b("b")], None).unwrap()
    }

    #[test]
    fn valid_actions_hand_empty_two_clear() {
        let actions = valid_actions(&two_on_table());
        assert_eq!(
            actions,
            vec![BlockAction::Pickup(b("a")), BlockAction::Pickup(b("b"))]
        );
    }

    #[test]
    fn valid_actions_while_holding() {
        let state = BlockState::new([], [b("b")], Some(b("a"))).unwrap();
        let actions = valid_actions(&state);
        assert_eq!(
            actions,
            vec![
                BlockAction::Put(b("a")),
                BlockAction::Stack(b("a"), b("b"))
            ]
        );
    }

    #[test]
    fn valid_actions_single_block() {
        let state = BlockState::new([], [b("a")], None).unwrap();
        assert_eq!(valid_actions(&state), vec![BlockAction::Pickup(b("a"))]);
    }

    #[test]
    fn pickup_moves_block_to_hand() {
        let next = apply(&two_on_table(), &BlockAction::Pickup(b("a"))).unwrap();
        assert_eq!(next.holding(), Some(&b("a")));
        assert!(!next.is_on_table(&b("a")));
        assert!(!next.is_clear(&b("a")));
    }

    #[test]
    fn stack_then_unstack_restores_state() {
        let start = two_on_table();
        let held = apply(&start, &BlockAction::Pickup(b("a"))).unwrap();
        let stacked = apply(&held, &BlockAction::Stack(b("a"), b("b"))).unwrap();
        assert!(stacked.is_on(&b("a"), &b("b")));
        let unstacked = apply(&stacked, &BlockAction::Unstack(b("a"), b("b"))).unwrap();
        let down = apply(&unstacked, &BlockAction::Put(b("a"))).unwrap();
        assert_eq!(down, start);
    }

    #[test]
    fn pickup_while_holding_names_failed_condition() {
        let state = BlockState::new([], [b("b")], Some(b("a"))).unwrap();
        let err = apply(&state, &BlockAction::Pickup(b("b"))).unwrap_err();
        match err {
            Error::PreconditionViolated(cond) => assert_eq!(cond, "hand is empty"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn action_text_round_trip() {
        for action in [
            BlockAction::Pickup(b("orange")),
            BlockAction::Put(b("red")),
            BlockAction::Stack(b("orange"), b("red")),
            BlockAction::Unstack(b("yellow"), b("orange")),
        ] {
            assert_eq!(BlockAction::parse(&action.to_string()).unwrap(), action);
        }
        assert_eq!(
            BlockAction::Unstack(b("yellow"), b("orange")).to_string(),
            "unstack the yellow block from on top of the orange block"
        );
        assert_eq!(
            BlockAction::Pickup(b("brown")).sentence(),
            "Pick up the brown block."
        );
    }

    #[test]
    fn scenario_state_text_parses() {
        // Four blocks, white on purple, hand empty.
        let text = "the white block is clear, the cyan block is clear, the brown block is clear, \
                    the hand is empty, the white block is on top of the purple block, \
                    the purple block is on the table, the cyan block is on the table and \
                    the brown block is on the table";
        let state = parse_state_text(text).unwrap();
        assert_eq!(state.blocks().len(), 4);
        assert!(state.is_on(&b("white"), &b("purple")));
        assert!(state.hand_empty());
    }

    #[test]
    fn holding_state_text_round_trip() {
        let state = BlockState::new(
            [(b("white"), b("purple"))],
            [b("purple"), b("cyan")],
            Some(b("brown")),
        )
        .unwrap();
        let text = render_state_text(&state);
        assert!(text.contains("the brown block is in the hand"));
        assert!(text.contains("the hand is holding the brown block"));
        assert_eq!(parse_state_text(&text).unwrap(), state);
    }

    #[test]
    fn malformed_clause_is_reported() {
        let err = parse_state_text("the red block is floating").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("floating")),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn inconsistent_clear_clause_rejected() {
        let text = "the red block is clear, the hand is empty, \
                    the blue block is on top of the red block and the red block is on the table";
        assert!(parse_state_text(text).is_err());
    }

    fn arbitrary_state() -> impl Strategy<Value = BlockState> {
        (2usize..6, any::<u64>()).prop_map(|(n, seed)| {
            let names = ["red", "blue", "orange", "yellow", "white", "purple"];
            let blocks: Vec<Block> = names[..n].iter().map(|s| Block::new(*s)).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            random_state(&mut rng, &blocks)
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(state in arbitrary_state()) {
            let text = render_state_text(&state);
            prop_assert_eq!(parse_state_text(&text).unwrap(), state);
        }

        // apply succeeds exactly on valid actions and preserves the block set.
        #[test]
        fn apply_conserves_blocks(state in arbitrary_state()) {
            let blocks = state.blocks();
            for action in valid_actions(&state) {
                let next = apply(&state, &action).unwrap();
                prop_assert_eq!(next.blocks(), blocks.clone());
            }
        }

        #[test]
        fn valid_actions_are_exactly_the_applicable_ones(state in arbitrary_state()) {
            let valid = valid_actions(&state);
            for action in &valid {
                prop_assert!(apply(&state, action).is_ok());
            }
            // A handful of invalid probes must fail.
            let blocks: Vec<Block> = state.blocks().into_iter().collect();
            for x in &blocks {
                for y in &blocks {
                    if x == y {
                        continue;
                    }
                    let action = BlockAction::Stack(x.clone(), y.clone());
                    if !valid.contains(&action) {
                        prop_assert!(apply(&state, &action).is_err());
                    }
                }
            }
        }
    }
}
