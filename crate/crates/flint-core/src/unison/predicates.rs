//! Configuration-level predicates of the unison clock.
//!
//! These are the analysis-side notions (protected, good, out-protected,
//! justified, grounded) evaluated over a whole configuration with full graph
//! knowledge. The protocol itself only ever evaluates the signal-local
//! subset of them; the monitors in [`crate::verification`] use the rest.

use std::collections::VecDeque;

use crate::engine::StateId;
use crate::engine::ProtocolError;
use crate::topology::{Graph, NodeId};

use super::{Levels, Turn, UnisonProtocol};

/// Per-node view of a decoded unison configuration.
#[derive(Debug, Clone)]
pub struct ConfigView<'a> {
    graph: &'a Graph,
    levels: Levels,
    d: u32,
    turns: Vec<Turn>,
}

impl<'a> ConfigView<'a> {
    pub fn new(
        protocol: &UnisonProtocol,
        graph: &'a Graph,
        config: &[StateId],
    ) -> Result<Self, ProtocolError> {
        let turns = config
            .iter()
            .map(|&s| protocol.turn_of(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            graph,
            levels: *protocol.levels(),
            d: protocol.d(),
            turns,
        })
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn turn(&self, v: NodeId) -> Turn {
        self.turns[v as usize]
    }

    pub fn level(&self, v: NodeId) -> i32 {
        self.turns[v as usize].level()
    }

    /// Sensed level set `Λ_v` (inclusive neighborhood).
    pub fn sensed_levels(&self, v: NodeId) -> Vec<i32> {
        let mut ls: Vec<i32> = std::iter::once(v)
            .chain(self.graph.neighbors(v).iter().copied())
            .map(|u| self.level(u))
            .collect();
        ls.sort_unstable();
        ls.dedup();
        ls
    }

    /// An edge is protected when its endpoint levels are adjacent.
    pub fn edge_protected(&self, u: NodeId, v: NodeId) -> bool {
        self.levels
            .adjacent(self.level(u), self.level(v))
            .expect("decoded levels are valid")
    }

    /// A node is protected when all its incident edges are.
    pub fn protected(&self, v: NodeId) -> bool {
        self.graph
            .neighbors(v)
            .iter()
            .all(|&u| self.edge_protected(u, v))
    }

    /// Protected and sensing no faulty turn (its own included).
    pub fn good(&self, v: NodeId) -> bool {
        self.protected(v)
            && std::iter::once(v)
                .chain(self.graph.neighbors(v).iter().copied())
                .all(|u| self.turn(u).is_able())
    }

    /// `Λ_v ∩ Ψ^≫(λ_v) = ∅`: nothing sensed two or more units outwards.
    pub fn out_protected(&self, v: NodeId) -> bool {
        let far_out = self
            .levels
            .psi_ggt(self.level(v))
            .expect("decoded levels are valid");
        !self.sensed_levels(v).iter().any(|l| far_out.contains(l))
    }

    /// Faulty with a reason: not protected, or a neighbor one unit inwards
    /// is faulty too.
    pub fn justifiably_faulty(&self, v: NodeId) -> bool {
        let Turn::Faulty(l) = self.turn(v) else {
            return false;
        };
        if !self.protected(v) {
            return true;
        }
        let inward = self.levels.outwards(l, -1).expect("|ℓ| ≥ 2 for faulty turns");
        self.graph
            .neighbors(v)
            .iter()
            .any(|&u| self.turn(u) == Turn::Faulty(inward))
    }

    pub fn unjustifiably_faulty(&self, v: NodeId) -> bool {
        self.turn(v).is_faulty() && !self.justifiably_faulty(v)
    }

    /// BFS witness that `v` lies on a grounded path: a path of length at
    /// most `D` through protected nodes from `v` to a node at level `±1`.
    /// Returns the path (starting at `v`) or `None`.
    pub fn grounded_witness(&self, v: NodeId) -> Option<Vec<NodeId>> {
        if !self.protected(v) {
            return None;
        }
        let n = self.graph.node_count();
        let mut parent: Vec<Option<NodeId>> = vec![None; n];
        let mut dist: Vec<Option<u32>> = vec![None; n];
        let mut queue = VecDeque::new();
        dist[v as usize] = Some(0);
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].expect("queued nodes have distances");
            if self.level(u).abs() == 1 {
                let mut path = vec![u];
                let mut cur = u;
                while let Some(p) = parent[cur as usize] {
                    path.push(p);
                    cur = p;
                }
                path.reverse(); // ends at u; reverse so it starts at v
                return Some(path);
            }
            if du == self.d {
                continue;
            }
            for &w in self.graph.neighbors(u) {
                if dist[w as usize].is_none() && self.protected(w) {
                    dist[w as usize] = Some(du + 1);
                    parent[w as usize] = Some(u);
                    queue.push_back(w);
                }
            }
        }
        None
    }

    pub fn graph_protected(&self) -> bool {
        self.graph.nodes().all(|v| self.protected(v))
    }

    pub fn graph_good(&self) -> bool {
        self.graph.nodes().all(|v| self.good(v))
    }

    pub fn graph_out_protected(&self) -> bool {
        self.graph.nodes().all(|v| self.out_protected(v))
    }

    /// No unjustifiably faulty node anywhere.
    pub fn graph_justified(&self) -> bool {
        self.graph.nodes().all(|v| !self.unjustifiably_faulty(v))
    }
}

/// A graph-wide good check directly on outputs: every node in an output
/// state and every edge's clock values adjacent. Agrees with
/// [`ConfigView::graph_good`] by construction of the turn chart.
pub fn good_outputs(
    protocol: &UnisonProtocol,
    graph: &Graph,
    config: &[StateId],
) -> Result<bool, ProtocolError> {
    let view = ConfigView::new(protocol, graph, config)?;
    Ok(view.graph_good())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: &UnisonProtocol, turns: &[Turn]) -> Vec<StateId> {
        turns.iter().map(|&t| p.state_of(t).unwrap()).collect()
    }

    #[test]
    fn uniform_config_is_good_everywhere() {
        let p = UnisonProtocol::new(2).unwrap();
        let g = Graph::path(4).unwrap();
        let config = cfg(&p, &[Turn::Able(1); 4]);
        let view = ConfigView::new(&p, &g, &config).unwrap();
        for v in g.nodes() {
            assert!(view.protected(v));
            assert!(view.good(v));
            assert!(view.out_protected(v));
            assert!(view.grounded_witness(v).is_some());
        }
        assert!(view.graph_good());
    }

    #[test]
    fn out_protected_is_asymmetric_across_a_gap() {
        // Edge with levels 2 and 5 (k = 8): neither endpoint protected;
        // the node at 5 senses nothing in Ψ^≫(5) = {7, 8} so it is
        // out-protected, while the node at 2 senses 5 ∈ Ψ^≫(2) = {4..8}.
        let p = UnisonProtocol::new(2).unwrap();
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let config = cfg(&p, &[Turn::Able(2), Turn::Able(5)]);
        let view = ConfigView::new(&p, &g, &config).unwrap();
        assert!(!view.protected(0) && !view.protected(1));
        assert!(!view.out_protected(0));
        assert!(view.out_protected(1));
    }

    #[test]
    fn justifiably_faulty_via_inward_neighbor() {
        let p = UnisonProtocol::new(2).unwrap();
        let g = Graph::path(3).unwrap();
        let config = cfg(&p, &[Turn::Able(2), Turn::Faulty(3), Turn::Faulty(2)]);
        let view = ConfigView::new(&p, &g, &config).unwrap();
        assert!(view.protected(1));
        assert!(view.justifiably_faulty(1));
        // The faulty(2) node is protected and has no faulty(1) neighbor
        // (there is no such turn), so it is unjustifiably faulty.
        assert!(view.unjustifiably_faulty(2));
        assert!(!view.graph_justified());
    }

    #[test]
    fn grounded_respects_distance_bound() {
        let p = UnisonProtocol::new(1).unwrap();
        // Path of 4 nodes with levels 4,3,2,1: only nodes within D = 1 hops
        // of the level-1 node are grounded.
        let g = Graph::path(4).unwrap();
        let config = cfg(&p, &[Turn::Able(4), Turn::Able(3), Turn::Able(2), Turn::Able(1)]);
        let view = ConfigView::new(&p, &g, &config).unwrap();
        assert!(view.grounded_witness(3).is_some());
        assert_eq!(view.grounded_witness(2), Some(vec![2, 3]));
        assert!(view.grounded_witness(1).is_none());
        assert!(view.grounded_witness(0).is_none());
    }
}
