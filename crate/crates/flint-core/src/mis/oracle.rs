//! Post-hoc verification of MIS decisions against the trial semantics.
//!
//! A synchronous trace fixes every coin toss; from the coins alone (plus the
//! graph) the competition's outcome is recomputable without consulting the
//! protocol's transition logic. This module re-derives, for every completed
//! phase:
//!
//! * the per-trial candidacy matrix, by replaying the elimination rule over
//!   the logged coins;
//! * the join decision, via the score `Z(v) = Σᵢ 2^{τ−i}·C_v^i` restricted
//!   to the trials in which `v` was still a candidate — a node joins `IN`
//!   exactly when its masked score is no smaller than that of every
//!   undecided neighbor (the restriction matters: coins tossed vacuously
//!   after an elimination influence nobody);
//! * the `OUT` rule: an undecided node joins `OUT` exactly when a neighbor
//!   is `IN` by the end of the joining round.
//!
//! Any mismatch against what the state machine actually did is reported as a
//! violation. Phases interrupted by a restart (or cut off by the end of the
//! trace) are counted but not checked.

use thiserror::Error;

use super::{Coin, MisProtocol, MisState};
use crate::engine::{Protocol, StateId, Trace};
use crate::topology::{Graph, NodeId};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle requires a synchronous trace; step {step} activated {activated} of {n} nodes")]
    NotSynchronous { step: u64, activated: usize, n: usize },
    #[error("trace is {found} nodes wide, graph has {expected}")]
    WrongWidth { expected: usize, found: usize },
}

/// One completed phase's audit. `start`/`end` are configuration indices into
/// the trace (0 = initial configuration): the phase runs from the start
/// shape at `start` to the next one at `end`.
#[derive(Debug)]
pub struct PhaseCheck {
    pub start: usize,
    pub end: usize,
    pub undecided: usize,
    pub trials: usize,
    pub joined_in: Vec<NodeId>,
    pub joined_out: Vec<NodeId>,
    pub violations: Vec<String>,
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub phases: Vec<PhaseCheck>,
    /// Phases skipped because a restart cut them short or the trace ended.
    pub incomplete_phases: usize,
}

impl OracleReport {
    pub fn violation_count(&self) -> usize {
        self.phases.iter().map(|p| p.violations.len()).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count() == 0
    }

    /// Total join decisions audited across completed phases.
    pub fn decisions_checked(&self) -> usize {
        self.phases.iter().map(|p| p.joined_in.len() + p.joined_out.len()).sum()
    }
}

/// Replays the elimination rule over a phase's coin matrix. `coins[i][v]` is
/// node `v`'s coin in trial `i` (nodes indexed within the undecided set,
/// `adj` giving that set's internal adjacency). Returns the candidacy matrix:
/// row `i` is candidacy entering trial `i`, row `τ` the final candidacy.
pub fn tournament(adj: &[Vec<usize>], coins: &[Vec<u8>]) -> Vec<Vec<bool>> {
    let m = adj.len();
    let mut cands = Vec::with_capacity(coins.len() + 1);
    cands.push(vec![true; m]);
    for row in coins {
        let prev = cands.last().expect("seeded above");
        let next = (0..m)
            .map(|v| prev[v] && !(row[v] == 0 && adj[v].iter().any(|&u| prev[u] && row[u] == 1)))
            .collect();
        cands.push(next);
    }
    cands
}

/// Per-node masked coin sequences: a coin counts only if the node was still
/// a candidate when tossing it. Comparing two equal-length sequences
/// lexicographically is exactly comparing the scores `Σᵢ 2^{τ−i}·C_v^i`.
pub fn masked_scores(coins: &[Vec<u8>], cands: &[Vec<bool>]) -> Vec<Vec<u8>> {
    let m = cands[0].len();
    (0..m)
        .map(|v| (0..coins.len()).map(|i| coins[i][v] & (cands[i][v] as u8)).collect())
        .collect()
}

/// The score rule: `v` joins `IN` iff its masked score is ≥ every undecided
/// neighbor's.
pub fn score_joiners(adj: &[Vec<usize>], scores: &[Vec<u8>]) -> Vec<bool> {
    (0..adj.len())
        .map(|v| adj[v].iter().all(|&u| scores[v] >= scores[u]))
        .collect()
}

pub fn analyze(trace: &Trace, graph: &Graph, proto: &MisProtocol) -> Result<OracleReport, OracleError> {
    let n = graph.node_count();
    let host_count = proto.state_count();
    let d = proto.d();

    let mut configs: Vec<&[StateId]> = Vec::with_capacity(trace.steps.len() + 1);
    if trace.header.init.len() != n {
        return Err(OracleError::WrongWidth { expected: n, found: trace.header.init.len() });
    }
    configs.push(&trace.header.init);
    for s in &trace.steps {
        if s.states.len() != n {
            return Err(OracleError::WrongWidth { expected: n, found: s.states.len() });
        }
        if s.activated.len() != n {
            return Err(OracleError::NotSynchronous { step: s.t, activated: s.activated.len(), n });
        }
        configs.push(&s.states);
    }

    // σ-states (and anything else outside the host universe) decode to None.
    let decoded: Vec<Vec<Option<MisState>>> = configs
        .iter()
        .map(|cfg| {
            cfg.iter()
                .map(|&s| if s < host_count { proto.decode(s).ok() } else { None })
                .collect()
        })
        .collect();

    let phase_shape = |c: usize| {
        decoded[c].iter().all(|m| match m {
            Some(ms) => {
                ms.flag()
                    && ms.step() == 0
                    && match ms {
                        MisState::Undecided { cand, coin, .. } => *cand && *coin == Coin::None,
                        _ => true,
                    }
            }
            None => false,
        })
    };

    let starts: Vec<usize> =
        (0..decoded.len()).filter(|&c| phase_shape(c) && (c == 0 || !phase_shape(c - 1))).collect();

    let mut report = OracleReport::default();
    if starts.is_empty() {
        return Ok(report);
    }
    // The tail after the last start never completes within the trace.
    report.incomplete_phases += 1;

    for w in starts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if decoded[a + 1..b].iter().any(|cfg| cfg.iter().any(|m| m.is_none())) {
            report.incomplete_phases += 1;
            continue;
        }
        report.phases.push(check_phase(graph, &decoded, a, b, d));
    }
    Ok(report)
}

fn check_phase(
    graph: &Graph,
    decoded: &[Vec<Option<MisState>>],
    a: usize,
    b: usize,
    d: u32,
) -> PhaseCheck {
    let n = graph.node_count();
    let mut viol = Vec::new();
    let at = |r: usize, v: usize| decoded[a + r][v].as_ref().expect("σ-free phase");

    let mut u_set = Vec::new();
    let mut in0 = Vec::new();
    let mut out0 = Vec::new();
    for v in 0..n {
        match at(0, v) {
            MisState::Undecided { .. } => u_set.push(v),
            MisState::In { .. } => in0.push(v),
            MisState::Out { .. } => out0.push(v),
        }
    }

    // Decisions from earlier phases must survive this one untouched.
    for r in 0..=(b - a) {
        for &v in &in0 {
            if !at(r, v).is_in() {
                viol.push(format!("node {v} abandoned IN at offset {r}"));
            }
        }
        for &v in &out0 {
            if !at(r, v).is_out() {
                viol.push(format!("node {v} abandoned OUT at offset {r}"));
            }
        }
    }

    if decoded[b - 1].iter().any(|m| m.as_ref().map_or(true, |ms| ms.step() != d + 2)) {
        viol.push("phase closed without the whole graph parked at D+2".into());
    }

    let mut check = PhaseCheck {
        start: a,
        end: b,
        undecided: u_set.len(),
        trials: 0,
        joined_in: Vec::new(),
        joined_out: Vec::new(),
        violations: viol,
    };
    if u_set.is_empty() {
        return check;
    }

    // The joining round: the one synchronous round in which every step sits
    // at D+1. Survivors join IN here; OUT responses come one round later.
    let Some(r_in) = (1..(b - a)).find(|&r| (0..n).all(|v| at(r, v).step() == d + 1)) else {
        check.violations.push("no round with every step at D+1".into());
        return check;
    };
    let r_out = r_in + 1;

    for &v in &u_set {
        let first_in = (1..=(b - a)).find(|&r| at(r, v).is_in());
        let first_out = (1..=(b - a)).find(|&r| at(r, v).is_out());
        match (first_in, first_out) {
            (Some(r), None) if r == r_in => check.joined_in.push(v as NodeId),
            (None, Some(r)) if r == r_out => check.joined_out.push(v as NodeId),
            (None, None) => {}
            other => check
                .violations
                .push(format!("node {v} made a decision off-schedule: {other:?}")),
        }
    }

    // Undecided-set indexing and internal adjacency.
    let uix: Vec<Option<usize>> = {
        let mut m = vec![None; n];
        for (i, &v) in u_set.iter().enumerate() {
            m[v] = Some(i);
        }
        m
    };
    let adj: Vec<Vec<usize>> = u_set
        .iter()
        .map(|&v| graph.neighbors(v as NodeId).iter().filter_map(|&u| uix[u as usize]).collect())
        .collect();

    // Coins must fill every odd offset before the joining round, rectangular
    // across the undecided set, and appear nowhere else.
    let tau = r_in / 2;
    check.trials = tau;
    let mut coins: Vec<Vec<u8>> = Vec::with_capacity(tau);
    for i in 0..tau {
        let r = 2 * i + 1;
        let row: Vec<u8> = u_set
            .iter()
            .map(|&v| match at(r, v) {
                MisState::Undecided { coin: Coin::Zero, .. } => 0,
                MisState::Undecided { coin: Coin::One, .. } => 1,
                _ => {
                    check.violations.push(format!("node {v} missing a coin at offset {r}"));
                    0
                }
            })
            .collect();
        coins.push(row);
    }
    for r in 1..(b - a) {
        let expect_coin = r % 2 == 1 && r < r_in;
        if expect_coin {
            continue; // validated above
        }
        for &v in &u_set {
            if matches!(at(r, v), MisState::Undecided { coin, .. } if *coin != Coin::None) {
                check.violations.push(format!("node {v} holds a stray coin at offset {r}"));
            }
        }
    }

    // Candidacy must track the recomputed tournament round for round.
    let cands = tournament(&adj, &coins);
    for r in 0..(b - a) {
        let want = &cands[(r / 2).min(tau)];
        for (i, &v) in u_set.iter().enumerate() {
            if let MisState::Undecided { cand, .. } = at(r, v) {
                if *cand != want[i] {
                    check
                        .violations
                        .push(format!("node {v} candidacy {} at offset {r}, expected {}", cand, want[i]));
                }
            }
        }
    }

    // Join decisions, re-derived two independent ways.
    let final_cand = &cands[tau];
    let scores = masked_scores(&coins, &cands);
    let by_score = score_joiners(&adj, &scores);
    for (i, &v) in u_set.iter().enumerate() {
        if final_cand[i] != by_score[i] {
            check.violations.push(format!(
                "internal: tournament and score rule disagree at node {v} (candidacy {}, score rule {})",
                final_cand[i], by_score[i]
            ));
        }
        let joined = check.joined_in.contains(&(v as NodeId));
        if joined != final_cand[i] {
            check.violations.push(format!(
                "node {v} {} IN but the coins say {}",
                if joined { "joined" } else { "did not join" },
                if final_cand[i] { "it should have" } else { "it should not have" }
            ));
        }
    }

    // OUT responses: exactly the undecided nodes left adjacent to an IN node
    // (fresh joiner or one standing from an earlier phase).
    for &v in &u_set {
        let vi = uix[v].expect("u_set member");
        if final_cand[vi] {
            continue;
        }
        let expect_out = graph.neighbors(v as NodeId).iter().any(|&u| {
            in0.contains(&(u as usize))
                || uix[u as usize].map_or(false, |ui| final_cand[ui])
        });
        let went_out = check.joined_out.contains(&(v as NodeId));
        if expect_out != went_out {
            check.violations.push(format!(
                "node {v} {} OUT but an IN neighbor {} in sight",
                if went_out { "joined" } else { "did not join" },
                if expect_out { "was" } else { "was not" }
            ));
        }
    }

    check
}
