//! Laguerre, Charlier and Meixner polynomials evaluated by their three-term
//! recurrences, with an explicit log scale so high degrees neither overflow
//! nor underflow.
//!
//! Charlier and Meixner values follow the orthonormal conventions
//! `C_n(x; a) = √(aⁿ/n!) Σ_k (−1)^k C(n,k) C(x,k) k!/a^k` and
//! `M_n^{β,c}(x) = √(cⁿ (β)_n / n!) ₂F₁(−n, −x; β; 1 − 1/c)`.

use crate::error::{domain, Result};
use crate::series::SignedLog;
use crate::special::lgamma;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: u32 = 10_000;

/// Degrees above this also report the value in signed-log form.
pub const LOG_SCALE_DEGREE: u32 = 500;

const RESCALE_HI: f64 = 1e200;
const RESCALE_LO: f64 = 1e-200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PolyOrder(u32);

impl PolyOrder {
    pub fn new(n: u32) -> Result<Self> {
        if n <= MAX_DEGREE {
            Ok(PolyOrder(n))
        } else {
            Err(domain(format!("polynomial degree {n} exceeds {MAX_DEGREE}")))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// Polynomial value; `log` carries the signed log-magnitude for high degrees
/// or whenever `value` is not representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyValue {
    pub value: f64,
    pub log: Option<SignedLog>,
}

impl PolyValue {
    fn from_signed_log(n: u32, sl: SignedLog) -> Self {
        let value = sl.to_f64();
        let log = (n > LOG_SCALE_DEGREE || !value.is_finite() || (value == 0.0 && !sl.is_zero()))
            .then_some(sl);
        PolyValue { value, log }
    }

    pub fn signed_log(&self) -> SignedLog {
        self.log.unwrap_or_else(|| SignedLog::from_f64(self.value))
    }
}

#[derive(Debug, Clone, Copy)]
enum Family {
    /// Unnormalized `L_n^{(alpha)}`.
    Laguerre { alpha: f64 },
    /// `L_n^{(shape−1)} · √(n! / (shape)_n)`, orthonormal under Gamma(shape).
    GammaOrthonormal { shape: f64 },
    Charlier { a: f64 },
    Meixner { beta: f64, c: f64 },
}

/// The sequence `P_0(x), P_1(x), …` of one polynomial family at a fixed point,
/// produced by `P_{n+1} = A_n P_n + B_n P_{n−1}` with `P_{−1} = 0`.
///
/// At an integer point `x` the orthonormal Charlier and Meixner values decay
/// super-exponentially once `n > x`, which makes them the minimal solution of
/// the recurrence in `n`. Past that degree the value is taken from the dual
/// polynomial of degree `x` evaluated at `n` (both families are self-dual),
/// where forward recurrence is stable.
#[derive(Debug, Clone)]
pub struct PolySequence {
    family: Family,
    x: f64,
    n: u32,
    prev: f64,
    cur: f64,
    ln_scale: f64,
}

impl PolySequence {
    fn new(family: Family, x: f64) -> Self {
        Self {
            family,
            x,
            n: 0,
            prev: 0.0,
            cur: 1.0,
            ln_scale: 0.0,
        }
    }

    /// Unnormalized Laguerre `L_n^{(alpha)}(x)`, `alpha > −1`.
    pub fn laguerre(alpha: f64, x: f64) -> Result<Self> {
        if !(alpha > -1.0) {
            return Err(domain(format!("Laguerre order must exceed −1, got {alpha}")));
        }
        Ok(Self::new(Family::Laguerre { alpha }, x))
    }

    /// Laguerre polynomials of order `shape − 1` normalized to unit norm under
    /// the Gamma(`shape`) density.
    pub fn gamma_orthonormal(shape: f64, x: f64) -> Result<Self> {
        if !(shape > 0.0) {
            return Err(domain(format!("gamma shape must be positive, got {shape}")));
        }
        Ok(Self::new(Family::GammaOrthonormal { shape }, x))
    }

    pub fn charlier(a: f64, x: u64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(domain(format!("Charlier parameter must be positive, got {a}")));
        }
        Ok(Self::new(Family::Charlier { a }, x as f64))
    }

    pub fn meixner(beta: f64, c: f64, x: u64) -> Result<Self> {
        if !(beta > 0.0) || !(c > 0.0 && c < 1.0) {
            return Err(domain(format!(
                "Meixner parameters require beta > 0 and 0 < c < 1, got ({beta}, {c})"
            )));
        }
        Ok(Self::new(Family::Meixner { beta, c }, x as f64))
    }

    fn coefficients(&self, n: f64) -> (f64, f64) {
        let x = self.x;
        match self.family {
            Family::Laguerre { alpha } => (
                (2.0 * n + 1.0 + alpha - x) / (n + 1.0),
                -(n + alpha) / (n + 1.0),
            ),
            Family::GammaOrthonormal { shape } => (
                (2.0 * n + shape - x) / ((n + 1.0) * (n + shape)).sqrt(),
                -(n * (n + shape - 1.0) / ((n + 1.0) * (n + shape))).sqrt(),
            ),
            Family::Charlier { a } => (
                (n + a - x) / (a * (n + 1.0)).sqrt(),
                -(n / (n + 1.0)).sqrt(),
            ),
            Family::Meixner { beta, c } => (
                ((c - 1.0) * x + n + (n + beta) * c) / (c * (beta + n) * (n + 1.0)).sqrt(),
                -(n * (beta + n - 1.0) / ((n + 1.0) * (beta + n))).sqrt(),
            ),
        }
    }

    fn is_discrete(&self) -> bool {
        matches!(self.family, Family::Charlier { .. } | Family::Meixner { .. })
    }

    /// Value at degree `n > x` for the discrete families through duality.
    fn dual_value(&self, n: u32) -> SignedLog {
        let y = f64::from(n);
        let degree = self.x as u64;
        match self.family {
            Family::Charlier { a } => {
                let raw = scaled_recurrence(degree, |j| ((j + a - y) / a, -j / a));
                raw.scale(0.5 * (y * a.ln() - lgamma(y + 1.0)))
            }
            Family::Meixner { beta, c } => {
                let raw = scaled_recurrence(degree, |j| {
                    let d = c * (j + beta);
                    (((c - 1.0) * y + j + (j + beta) * c) / d, -j / d)
                });
                raw.scale(0.5 * (y * c.ln() + lgamma(beta + y) - lgamma(beta) - lgamma(y + 1.0)))
            }
            _ => unreachable!("duality applies to discrete families only"),
        }
    }

    /// Degree of the value the next call to `next` returns.
    pub fn degree(&self) -> u32 {
        self.n
    }

    fn advance(&mut self, n: u32) {
        let (a, b) = self.coefficients(f64::from(n));
        let next = a * self.cur + b * self.prev;
        self.prev = self.cur;
        self.cur = next;
        let big = self.cur.abs().max(self.prev.abs());
        if big > RESCALE_HI || (big < RESCALE_LO && big > 0.0) {
            self.prev /= big;
            self.cur /= big;
            self.ln_scale += big.ln();
        }
    }
}

impl Iterator for PolySequence {
    type Item = SignedLog;

    fn next(&mut self) -> Option<SignedLog> {
        let n = self.n;
        let dual = self.is_discrete() && f64::from(n) > self.x;
        let out = if dual {
            self.dual_value(n)
        } else {
            SignedLog::from_f64(self.cur).scale(self.ln_scale)
        };
        if !dual {
            self.advance(n);
        }
        self.n += 1;
        Some(out)
    }
}

/// `P_steps` for `P_{j+1} = A_j P_j + B_j P_{j−1}`, `P_0 = 1`, `P_{−1} = 0`,
/// with `coef(j) = (A_j, B_j)`.
fn scaled_recurrence<F: Fn(f64) -> (f64, f64)>(steps: u64, coef: F) -> SignedLog {
    let (mut prev, mut cur, mut ln_scale) = (0.0f64, 1.0f64, 0.0f64);
    for j in 0..steps {
        let (a, b) = coef(j as f64);
        let next = a * cur + b * prev;
        prev = cur;
        cur = next;
        let big = cur.abs().max(prev.abs());
        if big > RESCALE_HI || (big < RESCALE_LO && big > 0.0) {
            prev /= big;
            cur /= big;
            ln_scale += big.ln();
        }
    }
    SignedLog::from_f64(cur).scale(ln_scale)
}

fn nth(seq: PolySequence, n: PolyOrder) -> PolyValue {
    let sl = seq.skip(n.get() as usize).next().expect("sequence is infinite");
    PolyValue::from_signed_log(n.get(), sl)
}

/// Generalized Laguerre polynomial `L_n^{(alpha)}(x)`.
pub fn laguerre(n: PolyOrder, alpha: f64, x: f64) -> Result<PolyValue> {
    if !(x >= 0.0) {
        return Err(domain(format!("Laguerre argument must be non-negative, got {x}")));
    }
    Ok(nth(PolySequence::laguerre(alpha, x)?, n))
}

/// Orthonormal Charlier polynomial `C_n(x; a)`.
pub fn charlier(n: PolyOrder, a: f64, x: u64) -> Result<PolyValue> {
    Ok(nth(PolySequence::charlier(a, x)?, n))
}

/// Orthonormal Meixner polynomial `M_n^{β,c}(x)`.
pub fn meixner(n: PolyOrder, beta: f64, c: f64, x: u64) -> Result<PolyValue> {
    Ok(nth(PolySequence::meixner(beta, c, x)?, n))
}

/// Watson's bound `|L_n^{(α)}(x)| ≤ Γ(α+1+n) / (Γ(α+1) n!) · e^{x/2}` for
/// `x ≥ 0`, `α ≥ 0`.
pub fn watson_bound(n: PolyOrder, alpha: f64, x: f64) -> Result<f64> {
    Ok(ln_watson_bound(n, alpha, x)?.exp())
}

pub fn ln_watson_bound(n: PolyOrder, alpha: f64, x: f64) -> Result<f64> {
    if !(alpha >= 0.0 && x >= 0.0) {
        return Err(domain(format!(
            "Watson bound requires alpha ≥ 0 and x ≥ 0, got ({alpha}, {x})"
        )));
    }
    let n = f64::from(n.get());
    Ok(lgamma(alpha + 1.0 + n) - lgamma(alpha + 1.0) - lgamma(n + 1.0) + 0.5 * x)
}
