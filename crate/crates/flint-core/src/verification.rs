//! Task checkers, stabilization measurement, and per-step invariant
//! monitors.
//!
//! Checkers read only output values and the graph: unison safety (neighbor
//! clocks within one tick), unison liveness (enough single-tick advances
//! inside a diameter-plus-i round window), maximal independent set validity,
//! and single-leader validity. [`measure_stabilization`] scans a trace for
//! the first round from which a checker holds across a full window —
//! requiring output fixity for the static tasks. Monitors, by contrast, may
//! read full states: [`standard_monitors`] bundles the persistence and
//! closure invariants of the unison clock, checked step by step over
//! arbitrary schedules and initial configurations.

use crate::engine::{output_vector, Protocol, ProtocolError, StateId, Trace};
use crate::topology::{Graph, NodeId};
use crate::unison::predicates::ConfigView;
use crate::unison::{Level, Levels, UnisonProtocol};
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

/// A task-checker failure: either the configuration is not checkable or it
/// violates the task's condition.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("node {0} is not in an output state")]
    NotOutputConfig(NodeId),
    #[error("edge ({0}, {1}) holds clocks {2} and {3}, more than one tick apart")]
    ClocksTooFarApart(NodeId, NodeId, i64, i64),
    #[error("node {node} output jumped {from} -> {to}, not a single forward tick")]
    NonUnitAdvance { node: NodeId, from: i64, to: i64 },
    #[error("node {node} made {made} clock advances where {wanted} were required")]
    Starvation { node: NodeId, made: u32, wanted: u32 },
    #[error("trace holds {have} complete rounds, the check needs {need}")]
    TraceTooShort { have: usize, need: usize },
    #[error("adjacent nodes {0} and {1} are both in the independent set")]
    NotIndependent(NodeId, NodeId),
    #[error("node {0} is outside the set and has no neighbor inside")]
    NotMaximal(NodeId),
    #[error("output {value} of node {node} is not a set-membership bit")]
    NotBinary { node: NodeId, value: i64 },
    #[error("no leader elected")]
    NoLeader,
    #[error("{0} leaders elected")]
    MultipleLeaders(usize),
}

/// Unison safety: every edge's output clocks are at most one forward tick
/// apart. Errors out (distinctly from a violation) if any node holds no
/// output.
pub fn check_au_safety(
    protocol: &UnisonProtocol,
    graph: &Graph,
    config: &[StateId],
) -> Result<(), TaskError> {
    let outputs = decode_clocks(protocol, config)?;
    for &(u, v) in graph.edges() {
        let (a, b) = (outputs[u as usize], outputs[v as usize]);
        let adjacent = protocol
            .levels()
            .adjacent(a as Level, b as Level)
            .expect("decoded clock outputs are valid levels");
        if !adjacent {
            return Err(TaskError::ClocksTooFarApart(u, v, a, b));
        }
    }
    Ok(())
}

fn decode_clocks(protocol: &UnisonProtocol, config: &[StateId]) -> Result<Vec<i64>, TaskError> {
    config
        .iter()
        .enumerate()
        .map(|(v, &s)| protocol.output(s).ok_or(TaskError::NotOutputConfig(v as NodeId)))
        .collect()
}

/// Unison liveness surrogate: starting from `from_round`, within the next
/// `diameter + i` rounds every node must advance its output clock at least
/// `i` times, every advance being a single forward tick. Faulty detours
/// (missing outputs) are invisible until the node outputs again.
pub fn check_au_liveness(
    protocol: &UnisonProtocol,
    trace: &Trace,
    from_round: usize,
    i: u32,
    diameter: u32,
) -> Result<(), TaskError> {
    let need = from_round + diameter as usize + i as usize;
    if trace.rounds() < need {
        return Err(TaskError::TraceTooShort { have: trace.rounds(), need });
    }
    let start = trace.round_starts[from_round] as i64;
    let end = trace.round_starts[need] as i64;
    let n = trace.config_at(-1).len();
    let mut last: Vec<Option<i64>> =
        trace.config_at(start - 1).iter().map(|&s| protocol.output(s)).collect();
    let mut advances = vec![0u32; n];
    for t in start..end {
        let config = trace.config_at(t);
        for v in 0..n {
            let Some(cur) = protocol.output(config[v]) else { continue };
            let Some(prev) = last[v] else {
                last[v] = Some(cur);
                continue;
            };
            if cur == prev {
                continue;
            }
            let forward = protocol
                .levels()
                .forward(prev as Level)
                .expect("decoded clock outputs are valid levels");
            if cur != forward as i64 {
                return Err(TaskError::NonUnitAdvance { node: v as NodeId, from: prev, to: cur });
            }
            advances[v] += 1;
            last[v] = Some(cur);
        }
    }
    for v in 0..n {
        if advances[v] < i {
            return Err(TaskError::Starvation { node: v as NodeId, made: advances[v], wanted: i });
        }
    }
    Ok(())
}

/// Maximal-independent-set validity of a binary output vector.
pub fn check_mis(graph: &Graph, outputs: &[i64]) -> Result<(), TaskError> {
    for (v, &b) in outputs.iter().enumerate() {
        if b != 0 && b != 1 {
            return Err(TaskError::NotBinary { node: v as NodeId, value: b });
        }
    }
    for &(u, v) in graph.edges() {
        if outputs[u as usize] == 1 && outputs[v as usize] == 1 {
            return Err(TaskError::NotIndependent(u, v));
        }
    }
    for v in 0..outputs.len() {
        if outputs[v] == 0
            && !graph.neighbors(v as NodeId).iter().any(|&u| outputs[u as usize] == 1)
        {
            return Err(TaskError::NotMaximal(v as NodeId));
        }
    }
    Ok(())
}

/// Leader-election validity of a binary output vector.
pub fn check_le(outputs: &[i64]) -> Result<(), TaskError> {
    for (v, &b) in outputs.iter().enumerate() {
        if b != 0 && b != 1 {
            return Err(TaskError::NotBinary { node: v as NodeId, value: b });
        }
    }
    match outputs.iter().filter(|&&b| b == 1).count() {
        0 => Err(TaskError::NoLeader),
        1 => Ok(()),
        m => Err(TaskError::MultipleLeaders(m)),
    }
}

/// What [`measure_stabilization`] requires to hold across its window.
pub enum TaskChecker<'a> {
    /// Safety at every configuration of the window plus, for each count in
    /// `liveness`, at least that many clock advances per node within the
    /// window's first `diameter + count` rounds.
    Au { protocol: &'a UnisonProtocol, diameter: u32, liveness: Vec<u32>, window: u32 },
    /// Valid maximal independent set, outputs fixed across the window.
    Mis { window: u32 },
    /// Exactly one leader, outputs fixed across the window.
    Le { window: u32 },
}

impl TaskChecker<'_> {
    pub fn window(&self) -> u32 {
        match self {
            TaskChecker::Au { window, .. }
            | TaskChecker::Mis { window }
            | TaskChecker::Le { window } => *window,
        }
    }

    /// Window default for the unison clock: four full clock cycles.
    pub fn au_default_window(protocol: &UnisonProtocol) -> u32 {
        4 * protocol.levels().cycle_len() as u32
    }

    /// Window default for the static tasks.
    pub fn static_default_window(d: u32) -> u32 {
        2 * d + 4
    }
}

/// Outcome of scanning a trace for stabilization.
#[derive(Debug, Clone, Serialize)]
pub struct StabilizationReport {
    pub stabilized: bool,
    /// Smallest round index from which the checker held through the window.
    pub stabilization_round: Option<usize>,
    /// Complete rounds available in the trace.
    pub rounds_available: usize,
    pub steps_used: usize,
}

/// Finds the first round `i` such that the checker holds from the start of
/// round `i` through the start of round `i + W`.
pub fn measure_stabilization(
    trace: &Trace,
    graph: &Graph,
    protocol: &dyn Protocol,
    checker: &TaskChecker,
) -> StabilizationReport {
    let rounds = trace.rounds();
    let window = checker.window() as usize;
    let report = |round: Option<usize>| StabilizationReport {
        stabilized: round.is_some(),
        stabilization_round: round,
        rounds_available: rounds,
        steps_used: trace.steps.len(),
    };
    if rounds < window {
        return report(None);
    }

    // Per-configuration validity and change flags, computed once. Config
    // index c covers trace configurations -1..steps-1 shifted by one.
    let configs = trace.steps.len() + 1;
    let mut ok = vec![false; configs];
    let mut changed = vec![false; configs]; // vs the previous configuration
    match checker {
        TaskChecker::Mis { .. } | TaskChecker::Le { .. } => {
            let mut prev: Option<Vec<i64>> = None;
            for c in 0..configs {
                let config = trace.config_at(c as i64 - 1);
                let outputs = output_vector(protocol, config);
                ok[c] = outputs.as_ref().is_some_and(|o| match checker {
                    TaskChecker::Mis { .. } => check_mis(graph, o).is_ok(),
                    _ => check_le(o).is_ok(),
                });
                changed[c] = c > 0 && outputs != prev;
                prev = outputs;
            }
        }
        TaskChecker::Au { protocol: unison, .. } => {
            for c in 0..configs {
                let config = trace.config_at(c as i64 - 1);
                ok[c] = check_au_safety(unison, graph, config).is_ok();
            }
        }
    }
    let mut bad_before = vec![0usize; configs + 1]; // prefix of !ok and changes
    for c in 0..configs {
        bad_before[c + 1] = bad_before[c] + usize::from(!ok[c]) + usize::from(changed[c]);
    }

    for i in 0..=(rounds - window) {
        // Configurations at the start of rounds i and i+W, as `ok` indexes.
        let a = trace.round_starts[i] as usize;
        let b = trace.round_starts[i + window] as usize;
        // `changed[a]` compares against the pre-window configuration and
        // does not count; everything after must be quiet.
        if bad_before[b + 1] - bad_before[a] - usize::from(changed[a]) > 0 {
            continue;
        }
        if let TaskChecker::Au { protocol: unison, diameter, liveness, .. } = checker {
            let live = liveness
                .iter()
                .all(|&j| check_au_liveness(unison, trace, i, j, *diameter).is_ok());
            if !live {
                continue;
            }
        }
        return report(Some(i));
    }
    report(None)
}

/// A monitor violation, serializable as one JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub monitor: String,
    pub step: u64,
    pub nodes: Vec<NodeId>,
    pub detail: String,
}

/// Writes violations as JSON lines.
pub fn write_violations<W: Write>(violations: &[Violation], mut w: W) -> std::io::Result<()> {
    for v in violations {
        serde_json::to_writer(&mut w, v)?;
        writeln!(w)?;
    }
    Ok(())
}

/// A per-step invariant over consecutive configurations of a unison trace.
pub trait StepMonitor {
    fn name(&self) -> String;
    /// Checks the step from `pre` to `post`; `step` is 1-based.
    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation>;
}

fn violation(name: &str, step: u64, nodes: Vec<NodeId>, detail: String) -> Violation {
    Violation { monitor: name.into(), step, nodes, detail }
}

/// Protected edges stay protected, unless their endpoints sit on the
/// wrap-around level pair.
pub struct ProtectedEdgePersistence {
    levels: Levels,
}

impl StepMonitor for ProtectedEdgePersistence {
    fn name(&self) -> String {
        "protected-edge-persistence".into()
    }

    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation> {
        let k = self.levels.k();
        let mut out = Vec::new();
        for &(u, v) in pre.graph().edges() {
            let pair = (pre.level(u).min(pre.level(v)), pre.level(u).max(pre.level(v)));
            if pair == (-k, k) {
                continue;
            }
            if pre.edge_protected(u, v) && !post.edge_protected(u, v) {
                out.push(violation(
                    &self.name(),
                    step,
                    vec![u, v],
                    format!("protected edge ({u}, {v}) became unprotected"),
                ));
            }
        }
        out
    }
}

/// Out-protected nodes stay out-protected.
pub struct OutProtectedPersistence;

impl StepMonitor for OutProtectedPersistence {
    fn name(&self) -> String {
        "out-protected-persistence".into()
    }

    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation> {
        (0..pre.graph().node_count() as NodeId)
            .filter(|&v| pre.out_protected(v) && !post.out_protected(v))
            .map(|v| {
                violation(
                    &self.name(),
                    step,
                    vec![v],
                    format!("node {v} lost out-protection"),
                )
            })
            .collect()
    }
}

/// A node that changes level is out-protected afterwards.
pub struct LevelChangeOutProtects;

impl StepMonitor for LevelChangeOutProtects {
    fn name(&self) -> String {
        "level-change-out-protects".into()
    }

    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation> {
        (0..pre.graph().node_count() as NodeId)
            .filter(|&v| post.level(v) != pre.level(v) && !post.out_protected(v))
            .map(|v| {
                violation(
                    &self.name(),
                    step,
                    vec![v],
                    format!(
                        "node {v} moved {} -> {} without becoming out-protected",
                        pre.level(v),
                        post.level(v)
                    ),
                )
            })
            .collect()
    }
}

/// Across an unprotected edge the lower integer level may only rise and the
/// higher only fall, without meeting.
pub struct UnprotectedEdgeSqueeze;

impl StepMonitor for UnprotectedEdgeSqueeze {
    fn name(&self) -> String {
        "unprotected-edge-squeeze".into()
    }

    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation> {
        let mut out = Vec::new();
        for &(a, b) in pre.graph().edges() {
            if pre.edge_protected(a, b) {
                continue;
            }
            // Unprotected endpoints never share a level, so this orders them.
            let (u, v) = if pre.level(a) < pre.level(b) { (a, b) } else { (b, a) };
            let held = pre.level(u) <= post.level(u)
                && post.level(u) < post.level(v)
                && post.level(v) <= pre.level(v);
            if !held {
                out.push(violation(
                    &self.name(),
                    step,
                    vec![u, v],
                    format!(
                        "unprotected edge levels moved ({}, {}) -> ({}, {})",
                        pre.level(u),
                        pre.level(v),
                        post.level(u),
                        post.level(v)
                    ),
                ));
            }
        }
        out
    }
}

/// When every node is protected, the occupied levels form a block of at
/// most `d` forward ticks.
pub struct ProtectedLevelSpan {
    levels: Levels,
    d: u32,
}

impl ProtectedLevelSpan {
    fn block_ok(&self, view: &ConfigView) -> bool {
        let occupied: Vec<Level> =
            (0..view.graph().node_count() as NodeId).map(|v| view.level(v)).collect();
        'candidate: for &start in &occupied {
            let mut block = vec![start];
            let mut cur = start;
            for _ in 0..self.d {
                match self.levels.forward(cur) {
                    Ok(next) => {
                        block.push(next);
                        cur = next;
                    }
                    Err(_) => continue 'candidate,
                }
            }
            if occupied.iter().all(|l| block.contains(l)) {
                return true;
            }
        }
        false
    }
}

impl StepMonitor for ProtectedLevelSpan {
    fn name(&self) -> String {
        "protected-level-span".into()
    }

    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation> {
        let mut out = Vec::new();
        // The initial configuration is only visible as step 1's `pre`.
        if step == 1 && pre.graph_protected() && !self.block_ok(pre) {
            out.push(violation(
                &self.name(),
                0,
                vec![],
                "occupied levels of an all-protected configuration span too far".into(),
            ));
        }
        if post.graph_protected() && !self.block_ok(post) {
            out.push(violation(
                &self.name(),
                step,
                vec![],
                "occupied levels of an all-protected configuration span too far".into(),
            ));
        }
        out
    }
}

/// A good graph stays good.
pub struct GoodClosure;

impl StepMonitor for GoodClosure {
    fn name(&self) -> String {
        "good-closure".into()
    }

    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation> {
        if pre.graph_good() && !post.graph_good() {
            vec![violation(&self.name(), step, vec![], "the graph fell out of goodness".into())]
        } else {
            Vec::new()
        }
    }
}

/// Once the graph is simultaneously out-protected and justified, no node is
/// ever unjustifiably faulty again.
pub struct JustifiedEpochSoundness {
    triggered: bool,
}

impl StepMonitor for JustifiedEpochSoundness {
    fn name(&self) -> String {
        "justified-epoch-soundness".into()
    }

    fn observe(&mut self, step: u64, pre: &ConfigView, post: &ConfigView) -> Vec<Violation> {
        if !self.triggered && pre.graph_out_protected() && pre.graph_justified() {
            self.triggered = true;
        }
        if !self.triggered {
            return Vec::new();
        }
        (0..post.graph().node_count() as NodeId)
            .filter(|&v| post.unjustifiably_faulty(v))
            .map(|v| {
                violation(
                    &self.name(),
                    step,
                    vec![v],
                    format!("node {v} became unjustifiably faulty inside the justified epoch"),
                )
            })
            .collect()
    }
}

/// All invariant monitors for a unison protocol instance.
pub fn standard_monitors(protocol: &UnisonProtocol) -> Vec<Box<dyn StepMonitor>> {
    vec![
        Box::new(ProtectedEdgePersistence { levels: *protocol.levels() }),
        Box::new(OutProtectedPersistence),
        Box::new(LevelChangeOutProtects),
        Box::new(UnprotectedEdgeSqueeze),
        Box::new(ProtectedLevelSpan { levels: *protocol.levels(), d: protocol.d() }),
        Box::new(GoodClosure),
        Box::new(JustifiedEpochSoundness { triggered: false }),
    ]
}

/// Runs the monitors over every step of a unison trace.
pub fn attach_monitors(
    protocol: &UnisonProtocol,
    graph: &Graph,
    trace: &Trace,
    monitors: &mut [Box<dyn StepMonitor>],
) -> Result<Vec<Violation>, ProtocolError> {
    let mut violations = Vec::new();
    for t in 0..trace.steps.len() {
        let pre = ConfigView::new(protocol, graph, trace.config_at(t as i64 - 1))?;
        let post = ConfigView::new(protocol, graph, trace.config_at(t as i64))?;
        for monitor in monitors.iter_mut() {
            violations.extend(monitor.observe(t as u64 + 1, &pre, &post));
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unison::Turn;

    fn clock() -> UnisonProtocol {
        UnisonProtocol::new(1).unwrap()
    }

    fn config(p: &UnisonProtocol, turns: &[Turn]) -> Vec<StateId> {
        turns.iter().map(|&t| p.state_of(t).unwrap()).collect()
    }

    #[test]
    fn au_safety_accepts_adjacent_clocks_only() {
        let p = clock();
        let g = Graph::path(2).unwrap();
        let a = Turn::Able;
        assert_eq!(check_au_safety(&p, &g, &config(&p, &[a(1), a(1)])), Ok(()));
        assert_eq!(check_au_safety(&p, &g, &config(&p, &[a(1), a(2)])), Ok(()));
        // k = 5 for d = 1: the forward operator wraps 5 -> -5.
        assert_eq!(check_au_safety(&p, &g, &config(&p, &[a(5), a(-5)])), Ok(()));
        assert_eq!(
            check_au_safety(&p, &g, &config(&p, &[a(1), a(3)])),
            Err(TaskError::ClocksTooFarApart(0, 1, 1, 3))
        );
        assert_eq!(
            check_au_safety(&p, &g, &config(&p, &[a(1), Turn::Faulty(2)])),
            Err(TaskError::NotOutputConfig(1))
        );
    }

    #[test]
    fn mis_checker_catches_both_violation_kinds() {
        let k3 = Graph::complete(3).unwrap();
        assert_eq!(check_mis(&k3, &[0, 1, 0]), Ok(()));
        assert_eq!(check_mis(&k3, &[1, 1, 0]), Err(TaskError::NotIndependent(0, 1)));
        let p3 = Graph::path(3).unwrap();
        assert_eq!(check_mis(&p3, &[0, 0, 1]), Err(TaskError::NotMaximal(0)));
        assert_eq!(check_mis(&p3, &[1, 0, 1]), Ok(()));
        assert_eq!(check_mis(&p3, &[0, 2, 1]), Err(TaskError::NotBinary { node: 1, value: 2 }));
    }

    #[test]
    fn le_checker_counts_leaders() {
        assert_eq!(check_le(&[0, 0, 1, 0]), Ok(()));
        assert_eq!(check_le(&[0, 0, 0]), Err(TaskError::NoLeader));
        assert_eq!(check_le(&[1, 0, 1]), Err(TaskError::MultipleLeaders(2)));
    }
}
