//! Oblivious activation schedulers.
//!
//! A scheduler fixes the whole activation sequence up front as a pure function
//! of its kind, the run seed, and the step index — it never observes the
//! configuration. This is the adversary model the simulated protocols are
//! designed against, and it is also what makes traces replayable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NodeId, RngStreams};

/// Scheduler family. See [`SchedulerState`] for the step semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchedulerKind {
    /// Every node is activated at every step; rounds coincide with steps.
    Synchronous,
    /// Singleton activations `0, 1, ..., n-1, 0, ...`; round `i` spans steps
    /// `[i*n, (i+1)*n)`.
    RoundRobin,
    /// Each step activates a uniformly random non-empty subset, plus any node
    /// that would otherwise go `fair_window` consecutive steps without an
    /// activation. Every window of `fair_window` steps activates every node.
    RandomFair { fair_window: u32 },
    /// Explicit activation sets, one per step. Empty sets are permitted and
    /// count as ordinary steps. When `cycle` is set the script repeats.
    Scripted {
        script: Vec<Vec<NodeId>>,
        cycle: bool,
    },
}

impl SchedulerKind {
    /// Parse the scripted-schedule text format: one step per line, node ids
    /// separated by commas, `*` meaning all nodes, blank (or `-`) meaning an
    /// empty activation set. `#` starts a comment.
    pub fn parse_script(text: &str, n: usize, cycle: bool) -> Result<Self, String> {
        let mut script = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().starts_with('#') {
                // Comment-only lines do not contribute a step.
                continue;
            }
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line == "-" {
                script.push(Vec::new());
                continue;
            }
            if line == "*" {
                script.push((0..n as NodeId).collect());
                continue;
            }
            let mut set = Vec::new();
            for tok in line.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let v: NodeId = tok
                    .parse()
                    .map_err(|_| format!("line {}: bad node id {tok:?}", idx + 1))?;
                if v as usize >= n {
                    return Err(format!("line {}: node {v} out of range 0..{n}", idx + 1));
                }
                set.push(v);
            }
            set.sort_unstable();
            set.dedup();
            script.push(set);
        }
        Ok(SchedulerKind::Scripted { script, cycle })
    }
}

/// Stepping state for a scheduler over a fixed node count.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    kind: SchedulerKind,
    n: usize,
    /// Step index of each node's most recent activation, for the fairness
    /// force-add; `-1` pretends everyone was activated just before the run.
    last_activation: Vec<i64>,
}

impl SchedulerState {
    pub fn new(kind: SchedulerKind, n: usize) -> Self {
        Self {
            kind,
            n,
            last_activation: vec![-1; n],
        }
    }

    pub fn kind(&self) -> &SchedulerKind {
        &self.kind
    }

    /// Activation set for step `t` (sorted ids). Returns `None` when a
    /// non-cycling script is exhausted.
    pub fn activations(&mut self, t: u64, streams: &RngStreams) -> Option<Vec<NodeId>> {
        let set = match &self.kind {
            SchedulerKind::Synchronous => (0..self.n as NodeId).collect(),
            SchedulerKind::RoundRobin => vec![(t % self.n as u64) as NodeId],
            SchedulerKind::RandomFair { fair_window } => {
                let mut rng = streams.scheduler_step(t);
                let mut set: Vec<NodeId> = Vec::new();
                loop {
                    set.clear();
                    for v in 0..self.n as NodeId {
                        if rng.gen::<bool>() {
                            set.push(v);
                        }
                    }
                    if !set.is_empty() {
                        break;
                    }
                }
                let b = (*fair_window).max(1) as i64;
                for v in 0..self.n {
                    let overdue = t as i64 - self.last_activation[v] >= b - 1;
                    if overdue && !set.contains(&(v as NodeId)) {
                        set.push(v as NodeId);
                    }
                }
                set.sort_unstable();
                set
            }
            SchedulerKind::Scripted { script, cycle } => {
                if script.is_empty() {
                    return if *cycle { Some(Vec::new()) } else { None };
                }
                let idx = if *cycle {
                    (t % script.len() as u64) as usize
                } else if (t as usize) < script.len() {
                    t as usize
                } else {
                    return None;
                };
                script[idx].clone()
            }
        };
        for &v in &set {
            self.last_activation[v as usize] = t as i64;
        }
        Some(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin_cycles_singletons() {
        let streams = RngStreams::new(0);
        let mut s = SchedulerState::new(SchedulerKind::RoundRobin, 3);
        let picks: Vec<_> = (0..6).map(|t| s.activations(t, &streams).unwrap()).collect();
        assert_eq!(picks, vec![vec![0], vec![1], vec![2], vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn random_fair_covers_every_window() {
        let streams = RngStreams::new(7);
        let b = 3u64;
        let n = 6usize;
        let mut s = SchedulerState::new(SchedulerKind::RandomFair { fair_window: b as u32 }, n);
        let sets: Vec<Vec<NodeId>> = (0..200).map(|t| s.activations(t, &streams).unwrap()).collect();
        for w in 0..(200 - b as usize) {
            for v in 0..n as NodeId {
                assert!(
                    (w..w + b as usize).any(|t| sets[t].contains(&v)),
                    "node {v} missing from window starting at {w}"
                );
            }
        }
        assert!(sets.iter().all(|s| !s.is_empty()));
    }

    #[test]
    fn script_parsing() {
        let kind = SchedulerKind::parse_script("0,2\n*\n-\n1\n", 3, false).unwrap();
        let SchedulerKind::Scripted { script, .. } = &kind else {
            panic!("expected scripted")
        };
        assert_eq!(script.as_slice(), &[vec![0, 2], vec![0, 1, 2], vec![], vec![1]]);
        assert!(SchedulerKind::parse_script("5\n", 3, false).is_err());
    }
}
