//! Explicit tree realizations of the supported topology families, plus
//! breadth-first spanning-tree extraction from arbitrary graphs.
//!
//! Node ids are breadth-first ordinals starting at 0 for built trees, so
//! rebuilding the same spec always yields byte-identical structures. The
//! root (id 0 for built trees) models the base station at depth 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on realized tree size; the closed-form evaluators in
/// [`crate::analytic`] handle anything larger without materializing nodes.
pub const MAX_TREE_NODES: u128 = 1 << 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("linear topology needs at least one node")]
    EmptyChain,
    #[error("nested topology requires s <= d (got s={s}, d={d})")]
    NestedRegionTooDeep { s: u32, d: u32 },
    #[error("branching factor must be at least 1")]
    ZeroBranching,
    #[error("spec realizes {nodes} nodes, above the {MAX_TREE_NODES}-node cap")]
    TooLarge { nodes: u128 },
    #[error("graph is not connected from root {root}; unreachable nodes: {unreachable:?}")]
    Disconnected { root: usize, unreachable: Vec<usize> },
    #[error("edge ({u}, {v}) is a self-loop")]
    SelfLoop { u: usize, v: usize },
    #[error("node id {id} does not exist (graph has {nodes} nodes)")]
    UnknownNode { id: usize, nodes: usize },
    #[error("malformed edge list line {line}: {text:?}")]
    MalformedEdgeLine { line: usize, text: String },
}

/// Declarative shape of a tree topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TopologySpec {
    /// Chain of `n` nodes; the base station is one end.
    Linear { n: u64 },
    /// Balanced binary tree of depth `d`.
    Binary { d: u32 },
    /// Binary through depth `s`, ternary from `s+1` through `d`.
    Nested { s: u32, d: u32 },
    /// Balanced tree with uniform branching factor `q` and depth `d`.
    Qary { q: u32, d: u32 },
}

impl TopologySpec {
    pub fn validate(&self) -> Result<(), TopologyError> {
        match *self {
            TopologySpec::Linear { n } if n == 0 => Err(TopologyError::EmptyChain),
            TopologySpec::Nested { s, d } if s > d => {
                Err(TopologyError::NestedRegionTooDeep { s, d })
            }
            TopologySpec::Qary { q, .. } if q == 0 => Err(TopologyError::ZeroBranching),
            _ => Ok(()),
        }
    }

    /// Number of children a node at `depth` has under this spec.
    fn fanout(&self, depth: u32) -> u64 {
        match *self {
            TopologySpec::Linear { n } => u64::from(u64::from(depth) + 1 < n),
            TopologySpec::Binary { d } => {
                if depth < d {
                    2
                } else {
                    0
                }
            }
            TopologySpec::Nested { s, d } => {
                if depth >= d {
                    0
                } else if depth < s {
                    2
                } else {
                    3
                }
            }
            TopologySpec::Qary { q, d } => {
                if depth < d {
                    u64::from(q)
                } else {
                    0
                }
            }
        }
    }

    /// Total node count of the realized tree, computed without building it.
    pub fn node_count(&self) -> u128 {
        let max_depth = match *self {
            TopologySpec::Linear { n } => return u128::from(n),
            TopologySpec::Binary { d } | TopologySpec::Nested { d, .. } => d,
            TopologySpec::Qary { d, .. } => d,
        };
        let mut total: u128 = 0;
        let mut width: u128 = 1;
        for depth in 0..=max_depth {
            total = total.saturating_add(width);
            width = width.saturating_mul(u128::from(self.fanout(depth)));
        }
        total
    }
}

/// A single node of a realized tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub depth: u32,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Explicit tree; `nodes[id].id == id` for every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    /// Spec the tree was built from, if any (spanning trees have none).
    pub spec: Option<TopologySpec>,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The unique node without a parent.
    pub fn root(&self) -> &TreeNode {
        self.nodes
            .iter()
            .find(|n| n.parent.is_none())
            .expect("tree has a root")
    }

    pub fn max_depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Number of nodes at depth `m`; 0 beyond the deepest level.
    pub fn nodes_at_depth(&self, m: u32) -> u64 {
        self.nodes.iter().filter(|n| n.depth == m).count() as u64
    }

    /// Node counts per depth, indexed 0..=max_depth.
    pub fn depth_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.max_depth() as usize + 1];
        for node in &self.nodes {
            counts[node.depth as usize] += 1;
        }
        counts
    }

    /// Ids of all nodes at depth `m`, ascending.
    pub fn ids_at_depth(&self, m: u32) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.depth == m)
            .map(|n| n.id)
            .collect()
    }

    /// Undirected parent-child adjacency of this tree.
    pub fn as_graph(&self) -> AdjacencyGraph {
        let edges = self
            .nodes
            .iter()
            .filter_map(|n| n.parent.map(|p| (p, n.id)))
            .collect();
        AdjacencyGraph {
            node_count: self.nodes.len(),
            edges,
        }
    }
}

/// Builds the explicit realization of a topology spec.
///
/// Node ids are assigned in breadth-first order starting at 0 (the root);
/// construction is fully deterministic.
pub fn build(spec: &TopologySpec) -> Result<Tree, TopologyError> {
    spec.validate()?;
    let expected = spec.node_count();
    if expected > MAX_TREE_NODES {
        return Err(TopologyError::TooLarge { nodes: expected });
    }
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(expected as usize);
    nodes.push(TreeNode {
        id: 0,
        depth: 0,
        parent: None,
        children: Vec::new(),
    });
    let mut next = 0usize;
    while next < nodes.len() {
        let depth = nodes[next].depth;
        let fanout = spec.fanout(depth) as usize;
        for _ in 0..fanout {
            let id = nodes.len();
            nodes[next].children.push(id);
            nodes.push(TreeNode {
                id,
                depth: depth + 1,
                parent: Some(next),
                children: Vec::new(),
            });
        }
        next += 1;
    }
    debug_assert_eq!(nodes.len() as u128, expected);
    Ok(Tree {
        spec: Some(*spec),
        nodes,
    })
}

/// Number of nodes a spec realizes at depth `m`, without building the
/// whole tree past that depth.
pub fn nodes_at_depth(tree: &Tree, m: u32) -> u64 {
    tree.nodes_at_depth(m)
}

/// Undirected graph over nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
}

impl AdjacencyGraph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, TopologyError> {
        for &(u, v) in &edges {
            if u == v {
                return Err(TopologyError::SelfLoop { u, v });
            }
            for id in [u, v] {
                if id >= node_count {
                    return Err(TopologyError::UnknownNode {
                        id,
                        nodes: node_count,
                    });
                }
            }
        }
        Ok(Self { node_count, edges })
    }

    /// Parses edge-list text: one `u v` pair per line. A line with a single
    /// id declares an isolated node. Blank lines and `#` comments are
    /// skipped. The node set is `0..=max id seen`.
    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        let mut max_id: Option<usize> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = || TopologyError::MalformedEdgeLine {
                line: lineno + 1,
                text: line.to_owned(),
            };
            let mut parts = line.split_whitespace();
            let u: usize = parts.next().ok_or_else(malformed)?.parse().map_err(|_| malformed())?;
            max_id = Some(max_id.map_or(u, |m: usize| m.max(u)));
            if let Some(second) = parts.next() {
                let v: usize = second.parse().map_err(|_| malformed())?;
                if parts.next().is_some() {
                    return Err(malformed());
                }
                max_id = Some(max_id.unwrap().max(v));
                if u == v {
                    return Err(TopologyError::SelfLoop { u, v });
                }
                edges.push((u, v));
            }
        }
        Ok(Self {
            node_count: max_id.map_or(0, |m| m + 1),
            edges,
        })
    }

    fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Extracts the breadth-first spanning tree of `graph` rooted at `root`.
///
/// Ties between candidate parents at the same depth go to the smallest
/// parent id, so the result is deterministic. Node ids in the returned
/// tree are the graph's ids.
pub fn extract_spanning_tree(graph: &AdjacencyGraph, root: usize) -> Result<Tree, TopologyError> {
    if root >= graph.node_count {
        return Err(TopologyError::UnknownNode {
            id: root,
            nodes: graph.node_count,
        });
    }
    let adj = graph.neighbor_lists();
    let mut nodes: Vec<TreeNode> = (0..graph.node_count)
        .map(|id| TreeNode {
            id,
            depth: 0,
            parent: None,
            children: Vec::new(),
        })
        .collect();
    let mut visited = vec![false; graph.node_count];
    visited[root] = true;
    // Level-synchronized BFS with the frontier kept in ascending id order:
    // the first discoverer of a node is then its smallest same-depth parent.
    let mut frontier = vec![root];
    let mut depth = 0u32;
    let mut reached = 1usize;
    while !frontier.is_empty() {
        depth += 1;
        let mut next_frontier = Vec::new();
        for &u in &frontier {
            for &v in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    reached += 1;
                    nodes[v].depth = depth;
                    nodes[v].parent = Some(u);
                    nodes[u].children.push(v);
                    next_frontier.push(v);
                }
            }
        }
        next_frontier.sort_unstable();
        frontier = next_frontier;
    }
    if reached < graph.node_count {
        let unreachable = (0..graph.node_count).filter(|&v| !visited[v]).collect();
        return Err(TopologyError::Disconnected { root, unreachable });
    }
    Ok(Tree { spec: None, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_depth_four_has_31_nodes_and_16_leaves() {
        let tree = build(&TopologySpec::Binary { d: 4 }).unwrap();
        assert_eq!(tree.len(), 31);
        assert_eq!(tree.nodes_at_depth(4), 16);
        assert!(tree
            .nodes
            .iter()
            .filter(|n| n.depth == 4)
            .all(|n| n.children.is_empty()));
    }

    #[test]
    fn nested_region_switches_to_three_children_after_s() {
        let tree = build(&TopologySpec::Nested { s: 2, d: 5 }).unwrap();
        assert_eq!(tree.depth_counts(), vec![1, 2, 4, 12, 36, 108]);
        assert_eq!(tree.len(), 163);
    }

    #[test]
    fn linear_is_a_chain() {
        let tree = build(&TopologySpec::Linear { n: 5 }).unwrap();
        assert_eq!(tree.len(), 5);
        for (m, node) in tree.nodes.iter().enumerate() {
            assert_eq!(node.depth as usize, m);
            let expected_children = if m + 1 < 5 { 1 } else { 0 };
            assert_eq!(node.children.len(), expected_children);
        }
    }

    #[test]
    fn nodes_at_depth_matches_counts() {
        let binary3 = build(&TopologySpec::Binary { d: 3 }).unwrap();
        assert_eq!(nodes_at_depth(&binary3, 3), 8);
        assert_eq!(nodes_at_depth(&binary3, 9), 0);
        let nested = build(&TopologySpec::Nested { s: 2, d: 5 }).unwrap();
        assert_eq!(nodes_at_depth(&nested, 4), 36);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert_eq!(
            build(&TopologySpec::Nested { s: 3, d: 2 }).unwrap_err(),
            TopologyError::NestedRegionTooDeep { s: 3, d: 2 }
        );
        assert_eq!(
            build(&TopologySpec::Linear { n: 0 }).unwrap_err(),
            TopologyError::EmptyChain
        );
        assert_eq!(
            build(&TopologySpec::Qary { q: 0, d: 3 }).unwrap_err(),
            TopologyError::ZeroBranching
        );
        assert!(matches!(
            build(&TopologySpec::Qary { q: 10, d: 12 }).unwrap_err(),
            TopologyError::TooLarge { .. }
        ));
    }

    #[test]
    fn spanning_tree_of_cycle_breaks_tie_toward_smaller_parent() {
        let graph = AdjacencyGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let tree = extract_spanning_tree(&graph, 0).unwrap();
        let depths: Vec<u32> = tree.nodes.iter().map(|n| n.depth).collect();
        assert_eq!(depths, vec![0, 1, 2, 1]);
        assert_eq!(tree.nodes[2].parent, Some(1));
    }

    #[test]
    fn spanning_tree_of_single_node() {
        let graph = AdjacencyGraph::new(1, vec![]).unwrap();
        let tree = extract_spanning_tree(&graph, 0).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root().id, 0);
    }

    #[test]
    fn disconnected_graph_lists_unreachable_nodes() {
        let graph = AdjacencyGraph::new(5, vec![(0, 1), (2, 3), (3, 4)]).unwrap();
        let err = extract_spanning_tree(&graph, 0).unwrap_err();
        assert_eq!(
            err,
            TopologyError::Disconnected {
                root: 0,
                unreachable: vec![2, 3, 4]
            }
        );
    }

    #[test]
    fn edge_list_round_trip() {
        let graph = AdjacencyGraph::parse_edge_list("0 1\n1 2\n\n# comment\n2 3\n3 0\n").unwrap();
        assert_eq!(graph.node_count, 4);
        assert_eq!(graph.edges.len(), 4);

        let singleton = AdjacencyGraph::parse_edge_list("0\n").unwrap();
        assert_eq!(singleton.node_count, 1);
        assert!(singleton.edges.is_empty());

        assert!(AdjacencyGraph::parse_edge_list("0 1 2\n").is_err());
        assert!(AdjacencyGraph::parse_edge_list("a b\n").is_err());
        assert!(matches!(
            AdjacencyGraph::parse_edge_list("1 1\n").unwrap_err(),
            TopologyError::SelfLoop { .. }
        ));
    }

    #[test]
    fn build_serialization_is_deterministic() {
        let spec = TopologySpec::Nested { s: 1, d: 4 };
        let a = serde_json::to_string(&build(&spec).unwrap()).unwrap();
        let b = serde_json::to_string(&build(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tree_json_shape_is_stable() {
        let tree = build(&TopologySpec::Linear { n: 2 }).unwrap();
        let json = serde_json::to_value(&tree).unwrap();
        assert_eq!(json["spec"]["family"], "linear");
        assert_eq!(json["nodes"][0]["parent"], serde_json::Value::Null);
        assert_eq!(json["nodes"][1]["depth"], 1);
        let back: Tree = serde_json::from_value(json).unwrap();
        assert_eq!(back, tree);
    }
}
