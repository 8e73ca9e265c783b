//! Level arithmetic for the unison clock.
//!
//! Levels are the signed integers `ℓ` with `1 ≤ |ℓ| ≤ k` (zero excluded).
//! The forward operator `φ` arranges all `2k` of them in a single cycle
//! `1, 2, …, k, −k, −k+1, …, −1, 1, …` which doubles as the clock group: one
//! clock tick is one `φ`-step. The outwards operator `ψ` moves along levels
//! of the same sign, changing only the magnitude; it is the axis on which
//! fault recovery walks back towards `±1`.

use crate::engine::ProtocolError;

/// A signed level; validity (`1 ≤ |ℓ| ≤ k`) is enforced by [`Levels`].
pub type Level = i32;

/// Level arithmetic for a fixed `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Levels {
    k: i32,
}

impl Levels {
    pub fn new(k: i32) -> Result<Self, ProtocolError> {
        if k < 2 {
            return Err(ProtocolError::InvalidParameter(format!(
                "level bound k = {k} must be at least 2"
            )));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> i32 {
        self.k
    }

    /// Number of levels, i.e. the order of the clock group.
    pub fn cycle_len(&self) -> i32 {
        2 * self.k
    }

    pub fn is_valid(&self, level: Level) -> bool {
        level != 0 && level.abs() <= self.k
    }

    pub fn check(&self, level: Level) -> Result<(), ProtocolError> {
        if self.is_valid(level) {
            Ok(())
        } else {
            Err(ProtocolError::InvalidLevel(level, self.k))
        }
    }

    /// Position of `level` along the `φ`-cycle, with `1` at position 0 and
    /// `−1` at position `2k − 1`.
    pub fn cycle_index(&self, level: Level) -> Result<i32, ProtocolError> {
        self.check(level)?;
        Ok(if level > 0 { level - 1 } else { level + 2 * self.k })
    }

    pub fn from_cycle_index(&self, index: i32) -> Result<Level, ProtocolError> {
        let m = index.rem_euclid(2 * self.k);
        Ok(if m < self.k { m + 1 } else { m - 2 * self.k })
    }

    /// One forward step `φ(ℓ)`.
    pub fn forward(&self, level: Level) -> Result<Level, ProtocolError> {
        self.check(level)?;
        Ok(if level == -1 {
            1
        } else if level == self.k {
            -self.k
        } else {
            level + 1
        })
    }

    /// `φ^j(ℓ)` for any signed `j`.
    pub fn forward_iter(&self, level: Level, j: i64) -> Result<Level, ProtocolError> {
        let idx = self.cycle_index(level)? as i64;
        let m = (idx + j).rem_euclid(2 * self.k as i64) as i32;
        self.from_cycle_index(m)
    }

    /// `ψ^j(ℓ)`: same sign, magnitude `|ℓ| + j`. Defined only for
    /// `−|ℓ| < j ≤ k − |ℓ|`.
    pub fn outwards(&self, level: Level, j: i32) -> Result<Level, ProtocolError> {
        self.check(level)?;
        let a = level.abs();
        if j <= -a || j > self.k - a {
            return Err(ProtocolError::OperatorOutOfDomain {
                j,
                lo: -a,
                hi: self.k - a,
                level,
            });
        }
        Ok(level.signum() * (a + j))
    }

    /// `Ψ^>(ℓ)`: all levels strictly outwards of `ℓ`, in increasing
    /// magnitude.
    pub fn psi_gt(&self, level: Level) -> Result<Vec<Level>, ProtocolError> {
        self.check(level)?;
        Ok((1..=self.k - level.abs())
            .map(|j| level.signum() * (level.abs() + j))
            .collect())
    }

    /// `Ψ^≥(ℓ) = Ψ^>(ℓ) ∪ {ℓ}`.
    pub fn psi_ge(&self, level: Level) -> Result<Vec<Level>, ProtocolError> {
        let mut v = vec![level];
        v.extend(self.psi_gt(level)?);
        Ok(v)
    }

    /// `Ψ^≫(ℓ) = Ψ^>(ℓ) − {ψ^{+1}(ℓ)}`: at least two units outwards.
    pub fn psi_ggt(&self, level: Level) -> Result<Vec<Level>, ProtocolError> {
        Ok(self.psi_gt(level)?.into_iter().skip(1).collect())
    }

    /// `Ψ^<(ℓ)`: all levels strictly inwards of `ℓ`, in decreasing
    /// magnitude.
    pub fn psi_lt(&self, level: Level) -> Result<Vec<Level>, ProtocolError> {
        self.check(level)?;
        Ok((1..level.abs())
            .rev()
            .map(|a| level.signum() * a)
            .collect())
    }

    /// `Ψ^≤(ℓ) = Ψ^<(ℓ) ∪ {ℓ}`.
    pub fn psi_le(&self, level: Level) -> Result<Vec<Level>, ProtocolError> {
        let mut v = vec![level];
        v.extend(self.psi_lt(level)?);
        Ok(v)
    }

    /// `Ψ^≪(ℓ) = Ψ^<(ℓ) − {ψ^{−1}(ℓ)}`: at least two units inwards.
    pub fn psi_llt(&self, level: Level) -> Result<Vec<Level>, ProtocolError> {
        Ok(self.psi_lt(level)?.into_iter().skip(1).collect())
    }

    /// Two levels are adjacent when they are equal or one `φ`-step apart.
    pub fn adjacent(&self, a: Level, b: Level) -> Result<bool, ProtocolError> {
        Ok(a == b || self.forward(a)? == b || self.forward(b)? == a)
    }

    /// Distance on the `φ`-cycle.
    pub fn level_distance(&self, a: Level, b: Level) -> Result<u32, ProtocolError> {
        let ia = self.cycle_index(a)?;
        let ib = self.cycle_index(b)?;
        let d = (ia - ib).rem_euclid(2 * self.k);
        Ok(d.min(2 * self.k - d) as u32)
    }

    /// All valid levels in `φ`-cycle order starting at `1`.
    pub fn all(&self) -> Vec<Level> {
        (0..2 * self.k)
            .map(|i| self.from_cycle_index(i).expect("index in range"))
            .collect()
    }
}
