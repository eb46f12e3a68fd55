//! Arena-backed search tree.
//!
//! Nodes own their outgoing edges in proposal order; every non-root node
//! records the edge that leads to it. Node ids are creation-ordered indices,
//! which keeps all tie-breaking deterministic.

use serde::Serialize;

/// Index of a node in the tree arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId(pub usize);

/// A (node, outgoing edge index) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EdgeRef {
    pub node: NodeId,
    pub edge: usize,
}

/// An action edge with its reward bookkeeping.
#[derive(Debug, Clone)]
pub struct SearchEdge<A> {
    pub action: A,
    /// Lightweight prior reward attached at expansion.
    pub fast_reward: f64,
    /// Realized step reward, computed on first traversal.
    pub full_reward: Option<f64>,
    /// Current Q estimate; equals `fast_reward` until the first visit.
    pub q_estimate: f64,
    /// One aggregated future-reward value per iteration through this edge.
    pub reward_history: Vec<f64>,
    pub child: NodeId,
}

/// A state node.
#[derive(Debug, Clone)]
pub struct SearchNode<S, A> {
    pub id: NodeId,
    pub state: S,
    pub depth: usize,
    /// Edge leading here; `None` only for the root.
    pub parent: Option<EdgeRef>,
    pub edges: Vec<SearchEdge<A>>,
    pub visit_count: u64,
    pub terminal: bool,
}

impl<S, A> SearchNode<S, A> {
    pub fn is_leaf(&self) -> bool {
        self.edges.is_empty()
    }
}

/// The search tree arena.
#[derive(Debug, Clone)]
pub struct SearchTree<S, A> {
    nodes: Vec<SearchNode<S, A>>,
}

impl<S, A> SearchTree<S, A> {
    pub fn with_root(state: S, terminal: bool) -> Self {
        Self {
            nodes: vec![SearchNode {
                id: NodeId(0),
                state,
                depth: 0,
                parent: None,
                edges: Vec::new(),
                visit_count: 0,
                terminal,
            }],
        }
    }

    pub fn root_id(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &SearchNode<S, A> {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut SearchNode<S, A> {
        &mut self.nodes[id.0]
    }

    pub fn edge(&self, at: EdgeRef) -> &SearchEdge<A> {
        &self.nodes[at.node.0].edges[at.edge]
    }

    pub fn edge_mut(&mut self, at: EdgeRef) -> &mut SearchEdge<A> {
        &mut self.nodes[at.node.0].edges[at.edge]
    }

    /// Append a new child under `parent` and return its id. The edge's Q
    /// estimate starts at the fast reward.
    pub fn attach(
        &mut self,
        parent: NodeId,
        action: A,
        fast_reward: f64,
        state: S,
        terminal: bool,
    ) -> NodeId {
        let child = NodeId(self.nodes.len());
        let depth = self.nodes[parent.0].depth + 1;
        let edge_index = self.nodes[parent.0].edges.len();
        self.nodes[parent.0].edges.push(SearchEdge {
            action,
            fast_reward,
            full_reward: None,
            q_estimate: fast_reward,
            reward_history: Vec::new(),
            child,
        });
        self.nodes.push(SearchNode {
            id: child,
            state,
            depth,
            parent: Some(EdgeRef {
                node: parent,
                edge: edge_index,
            }),
            edges: Vec::new(),
            visit_count: 0,
            terminal,
        });
        child
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SearchNode<S, A>> {
        self.nodes.iter()
    }

    /// All edges as (parent state, edge) pairs, in creation order.
    pub fn edges(&self) -> impl Iterator<Item = (&SearchNode<S, A>, &SearchEdge<A>)> {
        self.nodes
            .iter()
            .flat_map(|n| n.edges.iter().map(move |e| (n, e)))
    }

    /// Root path to `id`, as edge references ordered root-first.
    pub fn path_to(&self, id: NodeId) -> Vec<EdgeRef> {
        let mut path = Vec::new();
        let mut current = id;
        while let Some(parent_edge) = self.nodes[current.0].parent {
            path.push(parent_edge);
            current = parent_edge.node;
        }
        path.reverse();
        path
    }
}

/// Serializable tree snapshot for the `trace` subcommand and determinism
/// checks. States and actions are rendered with `Display`.
#[derive(Debug, Clone, Serialize)]
pub struct TreeDump {
    pub root: usize,
    pub nodes: Vec<NodeDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeDump {
    pub id: usize,
    pub state: String,
    pub depth: usize,
    pub terminal: bool,
    pub visits: u64,
    pub edges: Vec<EdgeDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeDump {
    pub action: String,
    pub fast_reward: f64,
    pub full_reward: Option<f64>,
    pub q: f64,
    pub visits: u64,
    pub rewards: Vec<f64>,
    pub child: usize,
}

impl<S: std::fmt::Display, A: std::fmt::Display> SearchTree<S, A> {
    pub fn dump(&self) -> TreeDump {
        TreeDump {
            root: 0,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDump {
                    id: n.id.0,
                    state: n.state.to_string(),
                    depth: n.depth,
                    terminal: n.terminal,
                    visits: n.visit_count,
                    edges: n
                        .edges
                        .iter()
                        .map(|e| EdgeDump {
                            action: e.action.to_string(),
                            fast_reward: e.fast_reward,
                            full_reward: e.full_reward,
                            q: e.q_estimate,
                            visits: self.nodes[e.child.0].visit_count,
                            rewards: e.reward_history.clone(),
                            child: e.child.0,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}
