//! Self-stabilizing leader election under a synchronous schedule.
//!
//! Execution proceeds in epochs of `D` rounds, tracked by a per-node round
//! counter (synchronous lockstep keeps all counters equal, so any sensed
//! difference is a fault). The protocol has two stages:
//!
//! * **compute**: every epoch, each node still holding `flag = 1` clears it
//!   with probability `p0`, and each surviving candidate tosses a fair coin.
//!   Two witness bits OR-flood through the graph over the epoch's `D`
//!   rounds — one carrying "some flag is still set", one carrying "some
//!   candidate tossed 1". At the epoch wrap a candidate that tossed `0`
//!   against a sensed `1` withdraws; and once the flag witness comes back
//!   empty, the stage halts with the surviving candidates marked as leaders
//!   (at least one candidate always survives, and a lone survivor is the
//!   whp outcome once the flag countdown outlasts the coin separation);
//! * **verify**: every epoch, each leader draws a temporary identifier from
//!   `[k_id]` and the identifier floods through `id_seen` adoption. A node
//!   that encounters two different identifiers — or none by the epoch's
//!   end — is a fault. Zero leaders are therefore caught deterministically,
//!   duplicate leaders with probability `1 − 1/k_id` per epoch.
//!
//! Faults surface through [`Host::fault`]; wrap the protocol in
//! [`WithRestart`](crate::restart::WithRestart) to convert them into a
//! coordinated restart. The restart exit state opens a warm-up epoch in
//! which nothing has been tossed yet (the exit transition is deterministic,
//! so the first tosses can only happen at the warm-up's wrap).

use crate::engine::{Choice, Protocol, ProtocolError, Signal, StateId};
use crate::restart::Host;
use serde_json::json;

/// A candidate's per-epoch coin; `None` both for non-candidates and during
/// the warm-up epoch following a restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coin {
    None,
    Zero,
    One,
}

/// One node's state. In `Verify`, `seen` is the first identifier the node
/// encountered this epoch (`0` meaning none yet); a leader's own draw is its
/// first encounter, so for leaders `seen` doubles as the drawn identifier
/// and is never `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeState {
    Compute { round: u32, flag: bool, cand: bool, coin: Coin, wf: bool, wc: bool },
    Verify { round: u32, leader: bool, seen: u32 },
}

impl LeState {
    pub fn round(&self) -> u32 {
        match *self {
            LeState::Compute { round, .. } | LeState::Verify { round, .. } => round,
        }
    }

    pub fn is_verify(&self) -> bool {
        matches!(self, LeState::Verify { .. })
    }

    pub fn is_leader(&self) -> bool {
        matches!(self, LeState::Verify { leader: true, .. })
    }
}

/// The leader election protocol for diameter bound `d`, flag-clear
/// probability `p0` and identifier range `k_id`.
#[derive(Debug, Clone)]
pub struct LeProtocol {
    d: u32,
    p0: f64,
    k_id: u32,
}

impl LeProtocol {
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

    pub fn k_id(&self) -> u32 {
        self.k_id
    }

    fn compute_count(&self) -> u32 {
        // round × flag × wf × wc × (cand, coin); a coin is only held by a
        // candidate, so the last pair has the four shapes 0⊥ 1⊥ 10 11.
        self.d * 2 * 2 * 2 * 4
    }

    fn verify_count(&self) -> u32 {
        // round × (leader with id ∈ [k_id], or non-leader with seen ∈ {⊥}∪[k_id])
        self.d * (2 * self.k_id + 1)
    }

    pub fn encode(&self, s: LeState) -> Result<StateId, ProtocolError> {
        let invalid = |detail: String| ProtocolError::InvalidParameter(detail);
        match s {
            LeState::Compute { round, flag, cand, coin, wf, wc } => {
                if round >= self.d {
                    return Err(invalid(format!("round {round} out of range")));
                }
                let cc = match (cand, coin) {
                    (false, Coin::None) => 0,
                    (true, Coin::None) => 1,
                    (true, Coin::Zero) => 2,
                    (true, Coin::One) => 3,
                    (false, _) => {
                        return Err(invalid("non-candidate cannot hold a coin".into()))
                    }
                };
                Ok((((round * 2 + flag as u32) * 2 + wf as u32) * 2 + wc as u32) * 4 + cc)
            }
            LeState::Verify { round, leader, seen } => {
                if round >= self.d {
                    return Err(invalid(format!("round {round} out of range")));
                }
                if seen > self.k_id {
                    return Err(invalid(format!("identifier {seen} out of range")));
                }
                if leader && seen == 0 {
                    return Err(invalid("a leader always holds its own identifier".into()));
                }
                let off = if leader { seen - 1 } else { self.k_id + seen };
                Ok(self.compute_count() + round * (2 * self.k_id + 1) + off)
            }
        }
    }

    pub fn decode(&self, state: StateId) -> Result<LeState, ProtocolError> {
        let mut ix = state;
        if ix < self.compute_count() {
            let (cand, coin) = match ix % 4 {
                0 => (false, Coin::None),
                1 => (true, Coin::None),
                2 => (true, Coin::Zero),
                _ => (true, Coin::One),
            };
            ix /= 4;
            let wc = ix % 2 == 1;
            ix /= 2;
            let wf = ix % 2 == 1;
            ix /= 2;
            return Ok(LeState::Compute { round: ix / 2, flag: ix % 2 == 1, cand, coin, wf, wc });
        }
        ix -= self.compute_count();
        if ix < self.verify_count() {
            let round = ix / (2 * self.k_id + 1);
            let off = ix % (2 * self.k_id + 1);
            return Ok(if off < self.k_id {
                LeState::Verify { round, leader: true, seen: off + 1 }
            } else {
                LeState::Verify { round, leader: false, seen: off - self.k_id }
            });
        }
        Err(ProtocolError::StateOutOfRange(state, self.state_count()))
    }

    fn sensed_states(&self, signal: &Signal) -> Result<Vec<LeState>, ProtocolError> {
        signal.iter().map(|s| self.decode(s)).collect()
    }

    fn next_distribution(&self, own: LeState, sensed: &[LeState]) -> Vec<(LeState, f64)> {
        match own {
            LeState::Compute { round, flag, cand, coin, wf, wc } => {
                // One flooding step per round, the wrap included: a witness
                // seeded at the epoch start thus propagates D hops before
                // the wrap reads it, covering the whole graph.
                let wf = wf
                    || sensed.iter().any(|s| matches!(s, LeState::Compute { wf: true, .. }));
                let wc = wc
                    || sensed.iter().any(|s| matches!(s, LeState::Compute { wc: true, .. }));
                if round + 1 < self.d {
                    return vec![(LeState::Compute { round: round + 1, flag, cand, coin, wf, wc }, 1.0)];
                }
                // Epoch wrap: settle this epoch's elimination first.
                let cand = cand && !(coin == Coin::Zero && wc);
                if !wf {
                    // Flag countdown over: the stage halts here, survivors
                    // become leaders and draw their first identifier.
                    return if cand {
                        self.leader_draw(1.0)
                    } else {
                        vec![(LeState::Verify { round: 0, leader: false, seen: 0 }, 1.0)]
                    };
                }
                let flag_branches: [(bool, f64); 2] = if flag {
                    [(false, self.p0), (true, 1.0 - self.p0)]
                } else {
                    [(false, 1.0), (true, 0.0)]
                };
                let mut next = Vec::new();
                for (flag2, fw) in flag_branches {
                    if fw == 0.0 {
                        continue;
                    }
                    if cand {
                        for c in [Coin::Zero, Coin::One] {
                            next.push((
                                LeState::Compute {
                                    round: 0,
                                    flag: flag2,
                                    cand: true,
                                    coin: c,
                                    wf: flag2,
                                    wc: c == Coin::One,
                                },
                                fw / 2.0,
                            ));
                        }
                    } else {
                        next.push((
                            LeState::Compute {
                                round: 0,
                                flag: flag2,
                                cand: false,
                                coin: Coin::None,
                                wf: flag2,
                                wc: false,
                            },
                            fw,
                        ));
                    }
                }
                next
            }
            LeState::Verify { round, leader, seen } => {
                if round + 1 < self.d {
                    let seen = if !leader && seen == 0 {
                        sensed
                            .iter()
                            .filter_map(|s| match s {
                                LeState::Verify { seen: j, .. } if *j != 0 => Some(*j),
                                _ => None,
                            })
                            .min()
                            .unwrap_or(0)
                    } else {
                        seen
                    };
                    vec![(LeState::Verify { round: round + 1, leader, seen }, 1.0)]
                } else if leader {
                    self.leader_draw(1.0)
                } else {
                    vec![(LeState::Verify { round: 0, leader: false, seen: 0 }, 1.0)]
                }
            }
        }
    }

    fn leader_draw(&self, w: f64) -> Vec<(LeState, f64)> {
        let share = w / self.k_id as f64;
        (1..=self.k_id)
            .map(|j| (LeState::Verify { round: 0, leader: true, seen: j }, share))
            .collect()
    }
}

impl Protocol for LeProtocol {
    fn name(&self) -> String {
        "le".into()
    }

    fn params(&self) -> serde_json::Value {
        json!({ "d": self.d, "p0": self.p0, "k_id": self.k_id })
    }

    fn state_count(&self) -> StateId {
        self.compute_count() + self.verify_count()
    }

    /// Warm-up epoch entry: flag and candidacy set, nothing tossed yet. The
    /// flag witness is seeded so the warm-up cannot halt the stage.
    fn initial_state(&self) -> StateId {
        self.encode(LeState::Compute {
            round: 0,
            flag: true,
            cand: true,
            coin: Coin::None,
            wf: true,
            wc: false,
        })
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
            Ok(LeState::Verify { leader, .. }) => Some(leader as i64),
            _ => None,
        }
    }

    fn state_name(&self, state: StateId) -> String {
        match self.decode(state) {
            Ok(LeState::Compute { round, flag, cand, coin, wf, wc }) => {
                let coin_ch = match coin {
                    Coin::None => 'n',
                    Coin::Zero => '0',
                    Coin::One => '1',
                };
                format!(
                    "C|r{round}|f{}|c{}{coin_ch}|w{}{}",
                    flag as u32, cand as u32, wf as u32, wc as u32
                )
            }
            Ok(LeState::Verify { round, leader, seen }) => {
                let id = if leader { seen.to_string() } else { "n".into() };
                let seen = if seen == 0 { "n".into() } else { seen.to_string() };
                format!("V|r{round}|L{}|id{id}|seen{seen}", leader as u32)
            }
            Err(_) => format!("?{state}"),
        }
    }

    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        let err = |detail: &str| ProtocolError::ParseState(name.to_string(), detail.to_string());
        let parts: Vec<&str> = name.split('|').collect();
        let round_of = |s: &str| -> Result<u32, ProtocolError> {
            s.strip_prefix('r').and_then(|v| v.parse().ok()).ok_or_else(|| err("expected r<round>"))
        };
        let id_of = |s: &str| -> Result<u32, ProtocolError> {
            if s == "n" {
                Ok(0)
            } else {
                s.parse().map_err(|_| err("bad identifier"))
            }
        };
        let state = match parts.as_slice() {
            ["C", r, f, c, w] => {
                let flag = match f.strip_prefix('f') {
                    Some("0") => false,
                    Some("1") => true,
                    _ => return Err(err("expected f0 or f1")),
                };
                let cc: Vec<char> = c.strip_prefix('c').ok_or_else(|| err("expected c<cand><coin>"))?.chars().collect();
                let (cand, coin) = match cc.as_slice() {
                    ['0', 'n'] => (false, Coin::None),
                    ['1', 'n'] => (true, Coin::None),
                    ['1', '0'] => (true, Coin::Zero),
                    ['1', '1'] => (true, Coin::One),
                    _ => return Err(err("expected c<cand><coin> with a coin only on candidates")),
                };
                let ww: Vec<char> = w.strip_prefix('w').ok_or_else(|| err("expected w<wf><wc>"))?.chars().collect();
                let (wf, wc) = match ww.as_slice() {
                    [a @ ('0' | '1'), b @ ('0' | '1')] => (*a == '1', *b == '1'),
                    _ => return Err(err("expected w<wf><wc>")),
                };
                LeState::Compute { round: round_of(r)?, flag, cand, coin, wf, wc }
            }
            ["V", r, l, id, seen] => {
                let leader = match l.strip_prefix('L') {
                    Some("0") => false,
                    Some("1") => true,
                    _ => return Err(err("expected L0 or L1")),
                };
                let id = id_of(id.strip_prefix("id").ok_or_else(|| err("expected id<j>"))?)?;
                let seen = id_of(seen.strip_prefix("seen").ok_or_else(|| err("expected seen<j>"))?)?;
                if leader && id != seen {
                    return Err(err("a leader's first encounter is its own identifier"));
                }
                if !leader && id != 0 {
                    return Err(err("only leaders hold an identifier of their own"));
                }
                LeState::Verify { round: round_of(r)?, leader, seen }
            }
            _ => return Err(err("unknown state form")),
        };
        self.encode(state).map_err(|_| err("coordinates out of range"))
    }
}

impl Host for LeProtocol {
    /// Epoch consistency and verification-stage detectors. Clean executions
    /// keep every counter and stage aligned, exactly one identifier in
    /// flight, and every node reached by it before the epoch wraps.
    fn fault(&self, state: StateId, signal: &Signal) -> Result<bool, ProtocolError> {
        let own = self.decode(state)?;
        let sensed = self.sensed_states(signal)?;
        if sensed.iter().any(|s| s.round() != own.round()) {
            return Ok(true);
        }
        if sensed.iter().any(|s| s.is_verify() != own.is_verify()) {
            return Ok(true);
        }
        if let LeState::Verify { round, seen, .. } = own {
            let mut foreign = sensed.iter().filter_map(|s| match s {
                LeState::Verify { seen: j, .. } if *j != 0 => Some(*j),
                _ => None,
            });
            if seen != 0 {
                return Ok(foreign.any(|j| j != seen));
            }
            let first = foreign.next();
            if foreign.any(|j| Some(j) != first) {
                return Ok(true);
            }
            if round + 1 == self.d && first.is_none() {
                return Ok(true);
            }
        }
        Ok(false)
    }
}
