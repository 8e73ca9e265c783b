//! Undirected communication graphs: constructors, generators, and distances.
//!
//! Nodes are dense integer ids `0..n`. Anonymity of the simulated protocols is
//! preserved by construction elsewhere: transition functions only ever see a
//! node's own state and the set of states present in its inclusive
//! neighborhood, never an id.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identifier.
pub type NodeId = u16;

/// Errors from graph construction, parsing, and generation.
#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("node count {0} exceeds the supported maximum of {max}", max = NodeId::MAX)]
    TooManyNodes(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge {0}-{1} references a node outside 0..{2}")]
    NodeOutOfRange(NodeId, NodeId, usize),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph is disconnected; no finite diameter")]
    Disconnected,
    #[error("{kind} graph requires at least {min} nodes, got {got}")]
    TooSmall {
        kind: &'static str,
        min: usize,
        got: usize,
    },
    #[error("could not generate a connected graph with diameter <= {d} after {tries} attempts")]
    GenerationFailed { d: u32, tries: u32 },
}

/// An undirected simple graph over nodes `0..n`.
///
/// Adjacency lists are kept sorted so that everything derived from a graph is
/// deterministic regardless of construction order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    adj: Vec<Vec<NodeId>>,
}

impl Graph {
    /// Build a graph from an explicit edge list. Rejects self-loops, duplicate
    /// edges (in either orientation), and endpoints outside `0..n`.
    pub fn new(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if n > NodeId::MAX as usize {
            return Err(TopologyError::TooManyNodes(n));
        }
        let mut seen = BTreeSet::new();
        let mut adj = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(TopologyError::SelfLoop(u));
            }
            if u as usize >= n || v as usize >= n {
                return Err(TopologyError::NodeOutOfRange(u, v, n));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(TopologyError::DuplicateEdge(key.0, key.1));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
            normalized.push(key);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        normalized.sort_unstable();
        Ok(Self {
            n,
            edges: normalized,
            adj,
        })
    }

    /// Complete graph on `n >= 1` nodes.
    pub fn complete(n: usize) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u as NodeId, v as NodeId));
            }
        }
        Self::new(n, &edges)
    }

    /// Path `0-1-...-(n-1)`.
    pub fn path(n: usize) -> Result<Self, TopologyError> {
        let edges: Vec<_> = (1..n).map(|v| ((v - 1) as NodeId, v as NodeId)).collect();
        Self::new(n, &edges)
    }

    /// Cycle on `n >= 3` nodes.
    pub fn cycle(n: usize) -> Result<Self, TopologyError> {
        if n < 3 {
            return Err(TopologyError::TooSmall {
                kind: "cycle",
                min: 3,
                got: n,
            });
        }
        let mut edges: Vec<_> = (1..n).map(|v| ((v - 1) as NodeId, v as NodeId)).collect();
        edges.push((0, (n - 1) as NodeId));
        Self::new(n, &edges)
    }

    /// Wheel: hub node `0` adjacent to every rim node, rim `1..n` forming a
    /// cycle. Requires `n >= 4` so the rim is a proper cycle.
    pub fn wheel(n: usize) -> Result<Self, TopologyError> {
        if n < 4 {
            return Err(TopologyError::TooSmall {
                kind: "wheel",
                min: 4,
                got: n,
            });
        }
        let mut edges: Vec<_> = (1..n).map(|v| (0 as NodeId, v as NodeId)).collect();
        for v in 2..n {
            edges.push(((v - 1) as NodeId, v as NodeId));
        }
        edges.push((1, (n - 1) as NodeId));
        Self::new(n, &edges)
    }

    /// Random connected graph with diameter at most `d`.
    ///
    /// Construction: grow a random tree of depth at most `floor(d/2)` (each
    /// new node attaches to a uniformly chosen node of eligible depth), then
    /// add every non-tree edge independently with probability
    /// `extra_edge_prob`. The depth cap alone guarantees the diameter bound;
    /// the verification pass and retry loop are kept as a guard rail. `d == 1`
    /// forces the complete graph, the only graph of diameter one.
    pub fn random_bounded_diameter(
        n: usize,
        d: u32,
        extra_edge_prob: f64,
        seed: u64,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if n == 1 {
            return Self::new(1, &[]);
        }
        if d == 0 {
            // Two or more nodes cannot sit at distance zero from each other.
            return Err(TopologyError::GenerationFailed { d, tries: 0 });
        }
        if d == 1 {
            return Self::complete(n);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x746f_706f_6c6f_6779);
        const MAX_TRIES: u32 = 100;
        for _ in 0..MAX_TRIES {
            let depth_cap = d / 2;
            let mut depth = vec![0u32; n];
            let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
            let mut in_tree: Vec<NodeId> = vec![0];
            for v in 1..n as NodeId {
                let eligible: Vec<NodeId> = in_tree
                    .iter()
                    .copied()
                    .filter(|&u| depth[u as usize] < depth_cap)
                    .collect();
                let parent = if eligible.is_empty() {
                    // depth_cap == 0 cannot happen here (d >= 2), so this
                    // branch is unreachable; keep the root as a safe default.
                    0
                } else {
                    eligible[rng.gen_range(0..eligible.len())]
                };
                depth[v as usize] = depth[parent as usize] + 1;
                edges.push((parent, v));
                in_tree.push(v);
            }
            let tree_edges: BTreeSet<(NodeId, NodeId)> = edges
                .iter()
                .map(|&(u, v)| (u.min(v), u.max(v)))
                .collect();
            for u in 0..n as NodeId {
                for v in (u + 1)..n as NodeId {
                    if !tree_edges.contains(&(u, v)) && rng.gen_bool(extra_edge_prob) {
                        edges.push((u, v));
                    }
                }
            }
            let g = Self::new(n, &edges)?;
            if g.diameter()? <= d {
                return Ok(g);
            }
        }
        Err(TopologyError::GenerationFailed { d, tries: MAX_TRIES })
    }

    /// Parse the edge-list text format: one `u v` pair per line, blank lines
    /// and `#` comments ignored. Node count is `max id + 1`.
    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        let mut max_id: Option<NodeId> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<NodeId, TopologyError> {
                tok.ok_or(())
                    .and_then(|t| t.parse::<NodeId>().map_err(|_| ()))
                    .map_err(|_| TopologyError::Parse {
                        line: idx + 1,
                        msg: format!("expected `u v` node pair, got {raw:?}"),
                    })
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(TopologyError::Parse {
                    line: idx + 1,
                    msg: format!("trailing tokens after `u v` pair in {raw:?}"),
                });
            }
            max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
            edges.push((u, v));
        }
        let n = max_id.map_or(0, |m| m as usize + 1);
        Self::new(n, &edges)
    }

    /// Render the graph in the edge-list text format accepted by
    /// [`Graph::parse_edge_list`]. Isolated node counts are not representable
    /// in that format, so a `# n = ...` comment records them.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n = {}", self.n);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n as NodeId).into_iter()
    }

    /// Normalized edge list, each edge once with `u < v`, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v as usize].len()
    }

    /// BFS distances from `src`; unreachable nodes get `u32::MAX`.
    pub fn bfs_distances(&self, src: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        dist[src as usize] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &w in self.neighbors(u) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// All-pairs distance matrix via per-node BFS.
    pub fn all_pairs_distances(&self) -> Vec<Vec<u32>> {
        (0..self.n as NodeId).map(|v| self.bfs_distances(v)).collect()
    }

    /// Largest finite pairwise distance. Errors if the graph is disconnected.
    pub fn diameter(&self) -> Result<u32, TopologyError> {
        let mut best = 0;
        for v in 0..self.n as NodeId {
            let dist = self.bfs_distances(v);
            for &x in &dist {
                if x == u32::MAX {
                    return Err(TopologyError::Disconnected);
                }
                best = best.max(x);
            }
        }
        Ok(best)
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(|&d| d != u32::MAX)
    }
}
