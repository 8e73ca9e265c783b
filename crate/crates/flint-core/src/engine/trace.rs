//! Execution traces: a replayable record of a run.
//!
//! A trace is serialized as JSON Lines — one header object followed by one
//! object per step. The header pins everything needed to reproduce the run
//! (protocol identity and parameters, graph, seed, initial configuration);
//! each step records the activation set, the post-step configuration, and
//! which candidate every randomized node picked. Replaying a trace re-runs
//! the engine from the header and must reproduce the file byte for byte.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{NodeId, StateId};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace is empty (missing header)")]
    Empty,
    #[error("trace step {step}: {msg}")]
    Malformed { step: u64, msg: String },
}

/// Header line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphHeader {
    /// Protocol identifier, e.g. `unison`.
    pub protocol: String,
    /// Protocol parameters as reported by the protocol itself.
    pub params: serde_json::Value,
    pub n: usize,
    pub edges: Vec<(NodeId, NodeId)>,
    pub seed: u64,
    /// Scheduler description for reproduction.
    pub scheduler: serde_json::Value,
    /// Initial configuration, one state index per node.
    pub init: Vec<StateId>,
}

/// One engine step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// Nodes activated at this step (sorted).
    pub activated: Vec<NodeId>,
    /// Configuration after the step, one state index per node.
    pub states: Vec<StateId>,
    /// `(node, chosen_candidate_index)` for every node whose transition had
    /// more than one candidate this step, in node order.
    pub draws: Vec<(NodeId, u32)>,
}

/// A full run: header plus the step sequence, with round boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: GraphHeader,
    pub steps: Vec<StepRecord>,
    /// `round_starts[i]` is the step index at which round `i` begins; round 0
    /// starts at step 0. A round ends at the first step by which every node
    /// has been activated at least once since the round began.
    pub round_starts: Vec<u64>,
}

impl Trace {
    /// Configuration after step `t`, or the initial configuration for `t`
    /// one before the first step.
    pub fn config_at(&self, t: i64) -> &[StateId] {
        if t < 0 {
            &self.header.init
        } else {
            &self.steps[t as usize].states
        }
    }

    /// Number of complete rounds contained in the trace.
    pub fn rounds(&self) -> usize {
        rounds_elapsed(&self.round_starts, self.steps.len() as u64)
    }

    /// Serialize as JSON Lines. `serde_json` emits maps in struct-field
    /// order and we avoid floating-point formatting ambiguity by keeping all
    /// numeric fields integral, so output is deterministic.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        serde_json::to_writer(&mut w, &self.header).map_err(|source| TraceError::Json {
            line: 1,
            source,
        })?;
        w.write_all(b"\n")?;
        for (i, step) in self.steps.iter().enumerate() {
            serde_json::to_writer(&mut w, step).map_err(|source| TraceError::Json {
                line: i + 2,
                source,
            })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write cannot fail");
        String::from_utf8(buf).expect("trace JSON is UTF-8")
    }

    /// Parse a JSON Lines trace and recompute round boundaries.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut lines = r.lines().enumerate();
        let header: GraphHeader = loop {
            let Some((i, line)) = lines.next() else {
                return Err(TraceError::Empty);
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            break serde_json::from_str(&line)
                .map_err(|source| TraceError::Json { line: i + 1, source })?;
        };
        let mut steps: Vec<StepRecord> = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let step: StepRecord = serde_json::from_str(&line)
                .map_err(|source| TraceError::Json { line: i + 1, source })?;
            if step.t != steps.len() as u64 {
                return Err(TraceError::Malformed {
                    step: step.t,
                    msg: format!("expected step {}, found {}", steps.len(), step.t),
                });
            }
            if step.states.len() != header.n {
                return Err(TraceError::Malformed {
                    step: step.t,
                    msg: format!("{} states for {} nodes", step.states.len(), header.n),
                });
            }
            steps.push(step);
        }
        let round_starts = compute_round_starts(
            header.n,
            steps.iter().map(|s| s.activated.as_slice()),
        );
        Ok(Trace {
            header,
            steps,
            round_starts,
        })
    }

    pub fn from_jsonl_str(s: &str) -> Result<Self, TraceError> {
        Self::read_jsonl(s.as_bytes())
    }
}

/// Round boundaries of an activation sequence. Round `i` starts at
/// `starts[i]`; it ends one step after the prefix that first activates every
/// node at least once, so under a synchronous schedule round `i` is exactly
/// step `i`.
pub fn compute_round_starts<'a, I>(n: usize, activations: I) -> Vec<u64>
where
    I: IntoIterator<Item = &'a [NodeId]>,
{
    let mut starts = vec![0u64];
    let mut seen = vec![false; n];
    let mut remaining = n;
    for (t, set) in activations.into_iter().enumerate() {
        for &v in set {
            if !seen[v as usize] {
                seen[v as usize] = true;
                remaining -= 1;
            }
        }
        if remaining == 0 {
            starts.push(t as u64 + 1);
            seen.iter_mut().for_each(|s| *s = false);
            remaining = n;
        }
    }
    starts
}

/// Number of rounds fully elapsed by step `t_end` (exclusive), given round
/// start boundaries.
pub fn rounds_elapsed(round_starts: &[u64], t_end: u64) -> usize {
    round_starts.iter().skip(1).filter(|&&s| s <= t_end).count()
}
