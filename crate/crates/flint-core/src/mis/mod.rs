//! Self-stabilizing maximal independent set under a synchronous schedule.
//!
//! Every node runs three interleaved pieces in one state machine:
//!
//! * a **phase clock** (`flag`, `step`): each phase opens with a random
//!   prefix in which nodes hold `flag = 1` and clear it independently with
//!   probability `p0` per round; once cleared, a node climbs
//!   `step ← min sensed step + 1` until the whole graph parks at `D + 2`,
//!   at which point everyone wraps into the next phase together;
//! * a **competition** among undecided nodes: two-round trials (toss a fair
//!   coin, then observe) in which tossing `0` next to an undecided candidate
//!   that tossed `1` forfeits candidacy; survivors join `IN` when their step
//!   reaches `D + 1`, and their undecided neighbors join `OUT` one round
//!   later;
//! * a **detector** for broken outcomes: `IN` nodes re-draw a temporary
//!   identifier from `[k_id]` every round, so an `IN`–`IN` edge shows a
//!   foreign identifier (caught with probability `1 − 1/k_id` per round) and
//!   an `OUT` node with no `IN` neighbor senses no identifier at all (caught
//!   immediately). Detection is surfaced through [`Host::fault`]; wrap the
//!   protocol in [`WithRestart`](crate::restart::WithRestart) to turn faults
//!   into a coordinated restart.
//!
//! Decided nodes keep their decision forever (absent a restart) but keep
//! driving the phase clock, so later phases stay aligned graph-wide.

pub mod oracle;

use crate::engine::{Choice, Protocol, ProtocolError, Signal, StateId};
use crate::restart::Host;
use serde_json::json;

/// An undecided node's trial coin. `None` means the node tosses on its next
/// activation; a tossed value is held for exactly one round (the observe
/// round) and then cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coin {
    None,
    Zero,
    One,
}

/// One node's state: the decision tag with the live coordinates for that tag.
/// `id == 0` on an `In` node stands for "no identifier drawn yet"; it only
/// occurs in adversarial initial configurations and is replaced on the
/// node's first activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MisState {
    Undecided { flag: bool, step: u32, cand: bool, coin: Coin },
    In { flag: bool, step: u32, id: u32 },
    Out { flag: bool, step: u32 },
}

impl MisState {
    pub fn flag(&self) -> bool {
        match *self {
            MisState::Undecided { flag, .. }
            | MisState::In { flag, .. }
            | MisState::Out { flag, .. } => flag,
        }
    }

    pub fn step(&self) -> u32 {
        match *self {
            MisState::Undecided { step, .. }
            | MisState::In { step, .. }
            | MisState::Out { step, .. } => step,
        }
    }

    pub fn is_undecided(&self) -> bool {
        matches!(self, MisState::Undecided { .. })
    }

    pub fn is_in(&self) -> bool {
        matches!(self, MisState::In { .. })
    }

    pub fn is_out(&self) -> bool {
        matches!(self, MisState::Out { .. })
    }
}

/// The MIS protocol for diameter bound `d`, flag-clear probability `p0` and
/// identifier range `k_id`.
#[derive(Debug, Clone)]
pub struct MisProtocol {
    d: u32,
    p0: f64,
    k_id: u32,
}

impl MisProtocol {
    /// Requires `d ≥ 1`, `0 < p0 ≤ 1/2` and `k_id ≥ 2`. The upper bound on
    /// `p0` keeps the random prefix in the regime where the max-of-geometrics
    /// lower tail bound applies.
    pub fn new(d: u32, p0: f64, k_id: u32) -> Result<Self, ProtocolError> {
        if d == 0 {
            return Err(ProtocolError::InvalidParameter(
                "diameter bound d must be at least 1".into(),
            ));
        }
        if !(p0 > 0.0 && p0 <= 0.5) {
            return Err(ProtocolError::InvalidParameter(format!(
                "flag-clear probability must lie in (0, 1/2], got {p0}"
            )));
        }
        if k_id < 2 {
            return Err(ProtocolError::InvalidParameter(format!(
                "identifier range k_id must be at least 2, got {k_id}"
            )));
        }
        Ok(Self { d, p0, k_id })
    }

    /// Defaults `p0 = 1/4`, `k_id = 4`.
    pub fn with_defaults(d: u32) -> Result<Self, ProtocolError> {
        Self::new(d, 0.25, 4)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn k_id(&self) -> u32 {
        self.k_id
    }

    /// Number of step values, `0 ..= D + 2`.
    fn steps(&self) -> u32 {
        self.d + 3
    }

    fn undecided_count(&self) -> u32 {
        // flag × step × cand × coin
        2 * self.steps() * 2 * 3
    }

    fn in_count(&self) -> u32 {
        // flag × step × ({⊥} ∪ [k_id])
        2 * self.steps() * (self.k_id + 1)
    }

    fn out_count(&self) -> u32 {
        2 * self.steps()
    }

    pub fn encode(&self, s: MisState) -> Result<StateId, ProtocolError> {
        let steps = self.steps();
        let invalid = |detail: String| ProtocolError::InvalidParameter(detail);
        match s {
            MisState::Undecided { flag, step, cand, coin } => {
                if step >= steps {
                    return Err(invalid(format!("step {step} out of range")));
                }
                let coin_ix = match coin {
                    Coin::None => 0,
                    Coin::Zero => 1,
                    Coin::One => 2,
                };
                Ok((((flag as u32 * steps + step) * 2 + cand as u32) * 3) + coin_ix)
            }
            MisState::In { flag, step, id } => {
                if step >= steps {
                    return Err(invalid(format!("step {step} out of range")));
                }
                if id > self.k_id {
                    return Err(invalid(format!("identifier {id} out of range")));
                }
                let base = self.undecided_count();
                Ok(base + (flag as u32 * steps + step) * (self.k_id + 1) + id)
            }
            MisState::Out { flag, step } => {
                if step >= steps {
                    return Err(invalid(format!("step {step} out of range")));
                }
                let base = self.undecided_count() + self.in_count();
                Ok(base + flag as u32 * steps + step)
            }
        }
    }

    pub fn decode(&self, state: StateId) -> Result<MisState, ProtocolError> {
        let steps = self.steps();
        let mut ix = state;
        if ix < self.undecided_count() {
            let coin = match ix % 3 {
                0 => Coin::None,
                1 => Coin::Zero,
                _ => Coin::One,
            };
            ix /= 3;
            let cand = ix % 2 == 1;
            ix /= 2;
            return Ok(MisState::Undecided { flag: ix / steps == 1, step: ix % steps, cand, coin });
        }
        ix -= self.undecided_count();
        if ix < self.in_count() {
            let id = ix % (self.k_id + 1);
            ix /= self.k_id + 1;
            return Ok(MisState::In { flag: ix / steps == 1, step: ix % steps, id });
        }
        ix -= self.in_count();
        if ix < self.out_count() {
            return Ok(MisState::Out { flag: ix / steps == 1, step: ix % steps });
        }
        Err(ProtocolError::StateOutOfRange(state, self.state_count()))
    }

    fn sensed_states(&self, signal: &Signal) -> Result<Vec<MisState>, ProtocolError> {
        signal.iter().map(|s| self.decode(s)).collect()
    }

    /// The full next-state distribution for one activation: a list of
    /// `(state, probability)` pairs summing to 1. Randomness enters through
    /// up to three independent draws folded into one joint distribution —
    /// the flag-clear coin, the trial coin, and the identifier re-draw.
    fn next_distribution(&self, own: MisState, sensed: &[MisState]) -> Vec<(MisState, f64)> {
        let d = self.d;
        let step_min = sensed.iter().map(|s| s.step()).min().unwrap_or_else(|| own.step());
        let sensed_in = sensed.iter().any(|s| s.is_in());
        // The observe round's OR: some undecided candidate in the inclusive
        // neighborhood holds a tossed 1. Decided neighbors never occupy these
        // states, so the competition is confined to undecided nodes with no
        // identification needed.
        let trial_one = sensed.iter().any(
            |s| matches!(s, MisState::Undecided { cand: true, coin: Coin::One, .. }),
        );

        let flag_branches: [(bool, f64); 2] = if own.flag() {
            [(false, self.p0), (true, 1.0 - self.p0)]
        } else {
            [(false, 1.0), (true, 0.0)]
        };

        let mut next = Vec::new();
        for (flag_after, fw) in flag_branches {
            if fw == 0.0 {
                continue;
            }
            if flag_after {
                // Random prefix: hold the step, keep the trials going.
                self.push_continuation(own, true, own.step(), sensed_in, trial_one, fw, &mut next);
            } else if step_min == d + 2 {
                // Whole neighborhood parked: wrap into the next phase.
                match own {
                    MisState::Undecided { .. } => next.push((
                        MisState::Undecided { flag: true, step: 0, cand: true, coin: Coin::None },
                        fw,
                    )),
                    MisState::In { .. } => self.push_id_redraw(true, 0, fw, &mut next),
                    MisState::Out { .. } => {
                        next.push((MisState::Out { flag: true, step: 0 }, fw))
                    }
                }
            } else {
                self.push_continuation(own, false, step_min + 1, sensed_in, trial_one, fw, &mut next);
            }
        }
        debug_assert!((next.iter().map(|&(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-9);
        next
    }

    /// Non-wrap continuation: the phase-clock coordinate has been resolved to
    /// (`flag_after`, `step_new`); settle the decision and trial coordinates.
    fn push_continuation(
        &self,
        own: MisState,
        flag_after: bool,
        step_new: u32,
        sensed_in: bool,
        trial_one: bool,
        w: f64,
        next: &mut Vec<(MisState, f64)>,
    ) {
        let d = self.d;
        match own {
            MisState::Undecided { step, cand, coin, .. } => {
                // Observe rounds settle the pending coin before anything else,
                // so an elimination landing on the joining round still counts.
                let cand = match coin {
                    Coin::Zero if trial_one => false,
                    _ => cand,
                };
                if cand && step == d && step_new == d + 1 {
                    self.push_id_redraw(flag_after, step_new, w, next);
                } else if step == d + 1 && step_new == d + 2 && sensed_in {
                    next.push((MisState::Out { flag: flag_after, step: step_new }, w));
                } else if coin == Coin::None && step_new <= d {
                    // Toss round; tossing stops once the step passes D, but
                    // continues vacuously for nodes that lost candidacy.
                    for c in [Coin::Zero, Coin::One] {
                        next.push((
                            MisState::Undecided { flag: flag_after, step: step_new, cand, coin: c },
                            w / 2.0,
                        ));
                    }
                } else {
                    // Either an observe round (coin just settled) or a toss
                    // round past D (tossing over); both leave the coin blank.
                    next.push((
                        MisState::Undecided { flag: flag_after, step: step_new, cand, coin: Coin::None },
                        w,
                    ));
                }
            }
            MisState::In { .. } => self.push_id_redraw(flag_after, step_new, w, next),
            MisState::Out { .. } => {
                next.push((MisState::Out { flag: flag_after, step: step_new }, w))
            }
        }
    }

    fn push_id_redraw(&self, flag: bool, step: u32, w: f64, next: &mut Vec<(MisState, f64)>) {
        let share = w / self.k_id as f64;
        for id in 1..=self.k_id {
            next.push((MisState::In { flag, step, id }, share));
        }
    }
}

impl Protocol for MisProtocol {
    fn name(&self) -> String {
        "mis".into()
    }

    fn params(&self) -> serde_json::Value {
        json!({ "d": self.d, "p0": self.p0, "k_id": self.k_id })
    }

    fn state_count(&self) -> StateId {
        self.undecided_count() + self.in_count() + self.out_count()
    }

    /// Phase start: undecided, full candidacy, coin to be tossed.
    fn initial_state(&self) -> StateId {
        self.encode(MisState::Undecided { flag: true, step: 0, cand: true, coin: Coin::None })
            .expect("initial state is in range")
    }

    fn transition(&self, state: StateId, signal: &Signal) -> Result<Choice, ProtocolError> {
        let own = self.decode(state)?;
        let sensed = self.sensed_states(signal)?;
        let dist = self.next_distribution(own, &sensed);
        let mut encoded = Vec::with_capacity(dist.len());
        for (s, w) in dist {
            encoded.push((self.encode(s)?, w));
        }
        if encoded.len() == 1 {
            return Ok(Choice::Det(encoded[0].0));
        }
        let w0 = encoded[0].1;
        if encoded.iter().all(|&(_, w)| w == w0) {
            Ok(Choice::Uniform(encoded.into_iter().map(|(s, _)| s).collect()))
        } else {
            Ok(Choice::Weighted(encoded))
        }
    }

    fn output(&self, state: StateId) -> Option<i64> {
        match self.decode(state) {
            Ok(MisState::In { .. }) => Some(1),
            Ok(MisState::Out { .. }) => Some(0),
            _ => None,
        }
    }

    fn state_name(&self, state: StateId) -> String {
        match self.decode(state) {
            Ok(MisState::Undecided { flag, step, cand, coin }) => {
                let (coin_ch, phase_ch) = match coin {
                    Coin::None => ('n', 't'),
                    Coin::Zero => ('0', 'o'),
                    Coin::One => ('1', 'o'),
                };
                format!("U|f{}|s{}|c{}{}{}", flag as u32, step, cand as u32, coin_ch, phase_ch)
            }
            Ok(MisState::In { flag, step, id }) => {
                if id == 0 {
                    format!("IN|f{}|s{}|idn", flag as u32, step)
                } else {
                    format!("IN|f{}|s{}|id{}", flag as u32, step, id)
                }
            }
            Ok(MisState::Out { flag, step }) => format!("OUT|f{}|s{}", flag as u32, step),
            Err(_) => format!("?{state}"),
        }
    }

    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        let err = |detail: &str| ProtocolError::ParseState(name.to_string(), detail.to_string());
        let parts: Vec<&str> = name.split('|').collect();
        let flag_of = |s: &str| -> Result<bool, ProtocolError> {
            match s.strip_prefix('f') {
                Some("0") => Ok(false),
                Some("1") => Ok(true),
                _ => Err(err("expected f0 or f1")),
            }
        };
        let step_of = |s: &str| -> Result<u32, ProtocolError> {
            s.strip_prefix('s')
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("expected s<step>"))
        };
        let state = match parts.as_slice() {
            ["U", f, s, c] => {
                let rest = c.strip_prefix('c').ok_or_else(|| err("expected c<cand><coin><phase>"))?;
                let chars: Vec<char> = rest.chars().collect();
                let [cand_ch, coin_ch, phase_ch] = chars.as_slice() else {
                    return Err(err("expected c<cand><coin><phase>"));
                };
                let cand = match cand_ch {
                    '0' => false,
                    '1' => true,
                    _ => return Err(err("candidate must be 0 or 1")),
                };
                let (coin, phase) = match coin_ch {
                    'n' => (Coin::None, 't'),
                    '0' => (Coin::Zero, 'o'),
                    '1' => (Coin::One, 'o'),
                    _ => return Err(err("coin must be n, 0 or 1")),
                };
                if *phase_ch != phase {
                    return Err(err("trial phase inconsistent with coin"));
                }
                MisState::Undecided { flag: flag_of(f)?, step: step_of(s)?, cand, coin }
            }
            ["IN", f, s, id] => {
                let id_part = id.strip_prefix("id").ok_or_else(|| err("expected id<j>"))?;
                let id = if id_part == "n" {
                    0
                } else {
                    id_part.parse().map_err(|_| err("bad identifier"))?
                };
                MisState::In { flag: flag_of(f)?, step: step_of(s)?, id }
            }
            ["OUT", f, s] => MisState::Out { flag: flag_of(f)?, step: step_of(s)? },
            _ => return Err(err("unknown state form")),
        };
        self.encode(state)
            .map_err(|_| err("coordinates out of range"))
    }
}

impl Host for MisProtocol {
    /// Local inconsistency detectors; any hit sends the node into the restart
    /// chain. A clean MIS configuration never trips these: steps stay within
    /// one of each other, every `OUT` node senses an `IN` identifier, and an
    /// `IN` node only ever senses its own identifier.
    fn fault(&self, state: StateId, signal: &Signal) -> Result<bool, ProtocolError> {
        let own = self.decode(state)?;
        let sensed = self.sensed_states(signal)?;
        let own_step = own.step() as i64;
        if sensed.iter().any(|s| (s.step() as i64 - own_step).abs() > 1) {
            return Ok(true);
        }
        match own {
            MisState::In { id: own_id, .. } => Ok(sensed
                .iter()
                .any(|s| matches!(s, MisState::In { id, .. } if *id != 0 && *id != own_id))),
            MisState::Out { .. } => {
                Ok(!sensed.iter().any(|s| matches!(s, MisState::In { id, .. } if *id != 0)))
            }
            MisState::Undecided { .. } => Ok(false),
        }
    }
}
