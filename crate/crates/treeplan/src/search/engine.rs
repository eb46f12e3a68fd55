//! The four search phases and trace extraction.

use super::tree::{EdgeRef, NodeId, SearchTree};
use super::{uct_score, QAggregator, SearchConfig, Trace, TracePolicy, TraceStep, UnvisitedRule};
use crate::contracts::{Policy, RewardFunction, StepContext, WorldModel};
use crate::error::{Error, Result};

/// A finished search: the tree, the recorded trace of every iteration, and
/// the trace selected by the configured policy.
#[derive(Debug, Clone)]
pub struct SearchResult<S, A> {
    pub tree: SearchTree<S, A>,
    pub iterations: Vec<Trace<S, A>>,
    pub best: Option<Trace<S, A>>,
    pub config: SearchConfig,
}

/// First index of the maximum value; ties go to the lowest index.
fn argmax_first<I: Iterator<Item = f64>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        match best {
            Some((_, bv)) if !(v > bv) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Walk from the root picking the UCT argmax at each level until reaching a
/// leaf of the current tree or a terminal node.
///
/// Edges with an unvisited child take priority: under
/// [`UnvisitedRule::PriorFastReward`] the unvisited edge with the highest
/// fast reward is taken, under [`UnvisitedRule::InfiniteUct`] they all score
/// infinity and the lowest index wins.
pub fn select_path<S, A>(tree: &SearchTree<S, A>, config: &SearchConfig) -> Vec<EdgeRef> {
    let mut path = Vec::new();
    let mut current = tree.root_id();
    loop {
        let node = tree.node(current);
        if node.terminal || node.is_leaf() {
            return path;
        }
        let unvisited: Vec<usize> = node
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| tree.node(e.child).visit_count == 0)
            .map(|(i, _)| i)
            .collect();
        let pick = if !unvisited.is_empty() {
            match config.unvisited_rule {
                UnvisitedRule::PriorFastReward => {
                    let local = argmax_first(
                        unvisited.iter().map(|&i| node.edges[i].fast_reward),
                    )
                    .expect("non-empty");
                    unvisited[local]
                }
                UnvisitedRule::InfiniteUct => unvisited[0],
            }
        } else {
            argmax_first(node.edges.iter().map(|e| {
                uct_score(
                    e.q_estimate,
                    node.visit_count,
                    tree.node(e.child).visit_count,
                    config.exploration_weight,
                )
            }))
            .expect("non-empty")
        };
        path.push(EdgeRef {
            node: current,
            edge: pick,
        });
        current = node.edges[pick].child;
    }
}

/// Expand a leaf: propose up to `d` distinct actions, predict each next
/// state, attach fast rewards. A terminal node is left untouched.
pub fn expand<S: Clone, A: Clone + PartialEq>(
    tree: &mut SearchTree<S, A>,
    node_id: NodeId,
    policy: &dyn Policy<S, A>,
    world: &dyn WorldModel<S, A>,
    reward: &dyn RewardFunction<S, A>,
    config: &SearchConfig,
) -> Result<()> {
    let (state, depth) = {
        let node = tree.node(node_id);
        if node.terminal {
            return Ok(());
        }
        debug_assert!(node.is_leaf(), "expand on a non-leaf node");
        (node.state.clone(), node.depth)
    };
    let ctx = StepContext::at_depth(depth);
    let proposals = policy.propose_actions(&state, &ctx, config.branch_factor)?;
    let mut distinct: Vec<_> = Vec::with_capacity(proposals.len());
    for p in proposals {
        if !distinct.iter().any(|q: &crate::contracts::ProposedAction<A>| q.action == p.action) {
            distinct.push(p);
        }
    }
    distinct.truncate(config.branch_factor);
    if distinct.is_empty() {
        return Err(Error::PolicyExhausted { depth });
    }
    for proposal in distinct {
        let next = world.next_state(&state, &proposal.action, &ctx)?;
        let fast = reward.fast_reward(&state, &proposal.action, &ctx)?;
        let child_depth = depth + 1;
        let terminal =
            world.is_terminal(&next, child_depth) || child_depth >= config.depth_limit;
        tree.attach(node_id, proposal.action, fast, next, terminal);
    }
    Ok(())
}

/// Compute and store the full reward of an edge if this is its first
/// traversal.
fn ensure_full_reward<S: Clone, A: Clone>(
    tree: &mut SearchTree<S, A>,
    at: EdgeRef,
    reward: &dyn RewardFunction<S, A>,
) -> Result<()> {
    if tree.edge(at).full_reward.is_some() {
        return Ok(());
    }
    let parent = tree.node(at.node);
    let edge = &parent.edges[at.edge];
    let ctx = StepContext::at_depth(parent.depth);
    let value = reward.full_reward(
        &parent.state,
        &edge.action,
        &tree.node(edge.child).state,
        &ctx,
    )?;
    tree.edge_mut(at).full_reward = Some(value);
    Ok(())
}

/// Greedy roll-out from `from` until a terminal state or the depth limit,
/// expanding and materializing nodes along the way. At each step the action
/// with the highest fast reward is taken (ties to the lowest index) and its
/// full reward is realized. Returns the traversed edges.
pub fn simulate<S: Clone, A: Clone + PartialEq>(
    tree: &mut SearchTree<S, A>,
    from: NodeId,
    policy: &dyn Policy<S, A>,
    world: &dyn WorldModel<S, A>,
    reward: &dyn RewardFunction<S, A>,
    config: &SearchConfig,
) -> Result<Vec<EdgeRef>> {
    let mut path = Vec::new();
    let mut current = from;
    loop {
        if tree.node(current).terminal {
            return Ok(path);
        }
        if tree.node(current).is_leaf() {
            expand(tree, current, policy, world, reward, config)?;
        }
        let node = tree.node(current);
        let pick = argmax_first(node.edges.iter().map(|e| e.fast_reward)).expect("expanded");
        let at = EdgeRef {
            node: current,
            edge: pick,
        };
        ensure_full_reward(tree, at, reward)?;
        path.push(at);
        current = tree.edge(at).child;
    }
}

/// Back-propagate the rewards of a root-to-terminal path.
///
/// For the edge at position `t` the aggregator collapses `r_t..r_T` into one
/// value, appends it to the edge's history and recomputes the Q estimate
/// over the history. Every node on the path, including the root and the
/// terminal, gains one visit.
pub fn backpropagate<S, A>(
    tree: &mut SearchTree<S, A>,
    path: &[EdgeRef],
    aggregator: QAggregator,
) -> Result<()> {
    let rewards: Vec<f64> = path
        .iter()
        .map(|at| tree.edge(*at).full_reward.ok_or(Error::MissingReward))
        .collect::<Result<_>>()?;
    for (t, at) in path.iter().enumerate() {
        let value = aggregator.iteration_value(&rewards[t..]);
        let edge = tree.edge_mut(*at);
        edge.reward_history.push(value);
        edge.q_estimate = aggregator.combine_history(&edge.reward_history);
    }
    let root = tree.root_id();
    tree.node_mut(root).visit_count += 1;
    for at in path {
        let child = tree.edge(*at).child;
        tree.node_mut(child).visit_count += 1;
    }
    Ok(())
}

fn build_trace<S: Clone, A: Clone>(tree: &SearchTree<S, A>, path: &[EdgeRef]) -> Trace<S, A> {
    let steps = path
        .iter()
        .map(|at| {
            let edge = tree.edge(*at);
            TraceStep {
                state: tree.node(at.node).state.clone(),
                action: edge.action.clone(),
                full_reward: edge.full_reward.expect("realized path"),
            }
        })
        .collect();
    let terminal = path
        .last()
        .map(|at| tree.edge(*at).child)
        .unwrap_or(tree.root_id());
    Trace::new(steps, tree.node(terminal).state.clone())
}

/// Run the full search: `n_iterations` rounds of select, expand, simulate
/// and back-propagate. Deterministic given the seed and deterministic
/// backends; domain errors carry the iteration in which they occurred.
pub fn run_search<S: Clone, A: Clone + PartialEq>(
    root_state: S,
    world: &dyn WorldModel<S, A>,
    policy: &dyn Policy<S, A>,
    reward: &dyn RewardFunction<S, A>,
    config: &SearchConfig,
) -> Result<SearchResult<S, A>> {
    config.validate()?;
    let root_terminal = world.is_terminal(&root_state, 0);
    let mut tree = SearchTree::with_root(root_state, root_terminal);
    let mut iterations = Vec::with_capacity(config.n_iterations);
    for iteration in 0..config.n_iterations {
        let run = |tree: &mut SearchTree<S, A>| -> Result<Vec<EdgeRef>> {
            let mut path = select_path(tree, config);
            for at in &path {
                ensure_full_reward(tree, *at, reward)?;
            }
            let frontier = path
                .last()
                .map(|at| tree.edge(*at).child)
                .unwrap_or(tree.root_id());
            if !tree.node(frontier).terminal {
                let tail = simulate(tree, frontier, policy, world, reward, config)?;
                path.extend(tail);
            }
            backpropagate(tree, &path, config.q_aggregator)?;
            Ok(path)
        };
        let path = run(&mut tree).map_err(|e| e.at_iteration(iteration))?;
        iterations.push(build_trace(&tree, &path));
    }
    let mut result = SearchResult {
        tree,
        iterations,
        best: None,
        config: config.clone(),
    };
    result.best = extract_trace(&result, config.trace_policy).ok();
    Ok(result)
}

/// Pick the final trace from a finished search.
pub fn extract_trace<S: Clone, A: Clone>(
    result: &SearchResult<S, A>,
    policy: TracePolicy,
) -> Result<Trace<S, A>> {
    if result.iterations.is_empty() {
        return Err(Error::BestTraceUnavailable);
    }
    match policy {
        TracePolicy::BestIteration => {
            let best = argmax_first(result.iterations.iter().map(|t| t.total_reward))
                .expect("non-empty");
            Ok(result.iterations[best].clone())
        }
        TracePolicy::GreedyQ => {
            let tree = &result.tree;
            let mut path = Vec::new();
            let mut current = tree.root_id();
            while !tree.node(current).terminal {
                let node = tree.node(current);
                // Restrict to visited edges: only they carry realized rewards.
                let visited: Vec<usize> = node
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| !e.reward_history.is_empty())
                    .map(|(i, _)| i)
                    .collect();
                if visited.is_empty() {
                    return Err(Error::BestTraceUnavailable);
                }
                let local =
                    argmax_first(visited.iter().map(|&i| node.edges[i].q_estimate))
                        .expect("non-empty");
                let pick = visited[local];
                path.push(EdgeRef {
                    node: current,
                    edge: pick,
                });
                current = node.edges[pick].child;
            }
            Ok(build_trace(tree, &path))
        }
        TracePolicy::MostVisitedLeaf => {
            let tree = &result.tree;
            let leaf = tree
                .nodes()
                .filter(|n| n.terminal && n.visit_count > 0)
                .max_by(|a, b| {
                    a.visit_count
                        .cmp(&b.visit_count)
                        // Prefer the earliest-created node on ties.
                        .then(b.id.0.cmp(&a.id.0))
                })
                .ok_or(Error::BestTraceUnavailable)?;
            let path = tree.path_to(leaf.id);
            Ok(build_trace(tree, &path))
        }
    }
}

/// Chain-sampler baseline: one greedy roll-out from the root, no tree
/// refinement. Equivalent to a single search iteration.
pub fn greedy_chain<S: Clone, A: Clone + PartialEq>(
    root_state: S,
    world: &dyn WorldModel<S, A>,
    policy: &dyn Policy<S, A>,
    reward: &dyn RewardFunction<S, A>,
    config: &SearchConfig,
) -> Result<Trace<S, A>> {
    let mut one = config.clone();
    one.n_iterations = 1;
    let result = run_search(root_state, world, policy, reward, &one)?;
    extract_trace(&result, TracePolicy::BestIteration)
}
