//! Execution model shared by every protocol in the workbench.
//!
//! A protocol is an anonymous finite state machine: a transition sees only the
//! node's current state and its *signal* — the set of states present in the
//! node's inclusive neighborhood. No identities, no counts, no message
//! payloads. An adversarial (but oblivious) scheduler picks which nodes are
//! activated at each step; all nodes activated in a step read the
//! configuration as it stood before the step.

mod rng;
mod run;
mod scheduler;
mod trace;

pub use rng::RngStreams;
pub use run::{run, InitPolicy, RunOutcome, RunSpec, StopCondition, StopReason};
pub use scheduler::{SchedulerKind, SchedulerState};
pub use trace::{compute_round_starts, rounds_elapsed, GraphHeader, StepRecord, Trace, TraceError};

use thiserror::Error;

/// Dense index into a protocol's state universe.
pub type StateId = u32;

pub use crate::topology::NodeId;

/// Errors a protocol itself can raise.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("state id {0} is outside the {1}-state universe")]
    StateOutOfRange(StateId, StateId),
    #[error("level {0} is outside the valid domain for k = {1}")]
    InvalidLevel(i32, i32),
    #[error("operator power {j} is outside the domain ({lo}, {hi}] for level {level}")]
    OperatorOutOfDomain { j: i32, lo: i32, hi: i32, level: i32 },
    #[error("cannot parse state name {0:?}: {1}")]
    ParseState(String, String),
    #[error("transition from state {state} produced an empty candidate set")]
    EmptyChoice { state: StateId },
    #[error("transition rules contradict each other for state {state}: {detail}")]
    Contradiction { state: StateId, detail: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// The set of states present in a node's inclusive neighborhood.
///
/// Semantically a presence bit per state of the universe; represented sparsely
/// as a sorted, deduplicated list because neighborhoods are small while
/// product-construction universes are not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signal {
    present: Vec<StateId>,
}

impl Signal {
    pub fn from_states(mut states: Vec<StateId>) -> Self {
        states.sort_unstable();
        states.dedup();
        Self { present: states }
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.present.binary_search(&s).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.present.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.present.len()
    }

    pub fn is_empty(&self) -> bool {
        self.present.is_empty()
    }
}

/// Candidate set for one activation, as produced by a transition function.
///
/// `Uniform` is the plain rule ("draw the next state uniformly from this
/// set"); `Weighted` expresses biased coins such as a phase clock's reset
/// probability. Candidates must be distinct; a singleton is deterministic and
/// consumes no randomness.
#[derive(Debug, Clone, PartialEq)]
pub enum Choice {
    Det(StateId),
    Uniform(Vec<StateId>),
    Weighted(Vec<(StateId, f64)>),
}

impl Choice {
    /// Number of candidate states.
    pub fn len(&self) -> usize {
        match self {
            Choice::Det(_) => 1,
            Choice::Uniform(v) => v.len(),
            Choice::Weighted(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All candidate states in declaration order.
    pub fn candidates(&self) -> Vec<StateId> {
        match self {
            Choice::Det(s) => vec![*s],
            Choice::Uniform(v) => v.clone(),
            Choice::Weighted(v) => v.iter().map(|&(s, _)| s).collect(),
        }
    }
}

/// An anonymous randomized finite state machine.
///
/// Implementations must be pure: `transition` may not keep mutable state, and
/// identical `(state, signal)` inputs must yield identical candidate sets in
/// identical order. All randomness is expressed through [`Choice`] and
/// resolved by the engine from seed-derived streams, which is what makes runs
/// replayable and schedule perturbations local.
pub trait Protocol: Send + Sync {
    /// Stable identifier used in trace headers.
    fn name(&self) -> String;

    /// Parameters needed to reconstruct this protocol for trace replay.
    fn params(&self) -> serde_json::Value;

    /// Size of the state universe; valid ids are `0..state_count()`.
    fn state_count(&self) -> StateId;

    /// The designated initial state a node assumes when (re)starting.
    fn initial_state(&self) -> StateId;

    /// Candidate next states for an activated node.
    fn transition(&self, state: StateId, signal: &Signal) -> Result<Choice, ProtocolError>;

    /// Output value of a state, or `None` for non-output states.
    fn output(&self, state: StateId) -> Option<i64>;

    /// Human-readable state name (also the scripted-configuration syntax).
    fn state_name(&self, state: StateId) -> String;

    /// Inverse of [`Protocol::state_name`].
    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError>;
}

/// True when every node's state has an output value.
pub fn is_output_config(protocol: &dyn Protocol, config: &[StateId]) -> bool {
    config.iter().all(|&s| protocol.output(s).is_some())
}

/// Per-node output vector, or `None` if some node is in a non-output state.
pub fn output_vector(protocol: &dyn Protocol, config: &[StateId]) -> Option<Vec<i64>> {
    config.iter().map(|&s| protocol.output(s)).collect()
}
