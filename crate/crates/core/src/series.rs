//! Compensated accumulation, signed log-magnitudes and the tail stopping rule
//! shared by every truncated series in the crate.

use std::ops::AddAssign;

/// Kahan–Babuška–Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator of `f64`.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// A real number stored as `sign · exp(ln_abs)`. `sign == 0` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub sign: i8,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        ln_abs: f64::NEG_INFINITY,
        sign: 0,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog {
                ln_abs: x.abs().ln(),
                sign: if x < 0.0 { -1 } else { 1 },
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln_abs.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn mul(self, other: SignedLog) -> SignedLog {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        SignedLog {
            ln_abs: self.ln_abs + other.ln_abs,
            sign: self.sign * other.sign,
        }
    }

    /// Multiplies by `exp(ln_factor)`.
    pub fn scale(self, ln_factor: f64) -> SignedLog {
        if self.is_zero() {
            return self;
        }
        SignedLog {
            ln_abs: self.ln_abs + ln_factor,
            sign: self.sign,
        }
    }
}

/// Stopping rule for series whose terms eventually decay geometrically.
///
/// Stops once the last three term magnitudes are all below `tol`, their
/// envelope is no longer growing, and (for `0 < ratio < 1`) the geometric
/// tail certificate `max(last three) · ratio / (1 − ratio) < tol` holds.
#[derive(Debug, Clone)]
pub struct TailStopper {
    tol: f64,
    ratio: f64,
    recent: [f64; 6],
    count: usize,
}

impl TailStopper {
    pub fn new(tol: f64, ratio: f64) -> Self {
        Self {
            tol,
            ratio,
            recent: [0.0; 6],
            count: 0,
        }
    }

    /// Records the magnitude of the next term; returns `true` when summation
    /// may stop after it.
    pub fn push(&mut self, term_abs: f64) -> bool {
        self.recent.rotate_left(1);
        self.recent[5] = if term_abs.is_nan() { f64::INFINITY } else { term_abs };
        self.count += 1;
        if self.count < 3 {
            return false;
        }
        let last = &self.recent[3..];
        if last.iter().any(|&t| t >= self.tol) {
            return false;
        }
        let env = last.iter().copied().fold(0.0, f64::max);
        let shrinking = if self.count >= 6 {
            env <= self.recent[..3].iter().copied().fold(0.0, f64::max)
        } else {
            last[2] <= last[1] && last[1] <= last[0]
        };
        if !shrinking {
            return false;
        }
        if self.ratio > 0.0 && self.ratio < 1.0 {
            env * self.ratio / (1.0 - self.ratio) < self.tol
        } else {
            true
        }
    }

    pub fn last(&self) -> f64 {
        self.recent[5]
    }
}
