//! Covariances of rejection indicators under the Lancaster laws.
//!
//! For a pair with canonical correlation `ρ` the indicator covariance is
//!
//! `κ = Σ_{n ≥ 1} ρ^n a_n b_n`,  with `a_n = E[φ_n(X); X in A]`,
//! `b_n = E[ψ_n(Y); Y in B]`
//!
//! where `A`, `B` are the acceptance regions. For the gamma coordinate
//! `b_n = τ^α e^{−τ} P_{n−1}(τ) / (Γ(α) √(nα))` by the partial integral
//! `∫_0^y x^α e^{−x} L_n^{(α)}(x) dx = y^{α+1} e^{−y} L_{n−1}^{(α+1)}(y) / n`,
//! with `P_{n−1}` orthonormal for Gamma(α+1).

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{CorrelationMatrix, DependenceDesign, DesignTemplate};
use crate::error::{domain, Error, Result};
use crate::lancaster::{
    lower_region_integral, Coordinate, FamilyParams, LancasterPair, Marginal, RejectionRegion,
    Truncation,
};
use crate::orthopoly::{PolyOrder, PolySequence};
use crate::quadrature::QuadSpec;
use crate::series::{NeumaierSum, SignedLog, TailStopper};
use crate::special::{lgamma, riemann_zeta, GammaParams, NBParams, PoissonParams, Probability};

/// `∫_0^y x^α e^{−x} L_n^{(α)}(x) dx` in closed form, `n ≥ 1`.
pub fn laguerre_partial_integral(n: PolyOrder, alpha: f64, y: f64) -> Result<f64> {
    let n = n.get();
    if n < 1 || !(alpha > -1.0) || !(y > 0.0) {
        return Err(domain(format!(
            "partial integral needs n ≥ 1, alpha > −1, y > 0; got ({n}, {alpha}, {y})"
        )));
    }
    let l = PolySequence::laguerre(alpha + 1.0, y)?
        .nth(n as usize - 1)
        .expect("infinite");
    Ok(l.scale((alpha + 1.0) * y.ln() - y - f64::from(n).ln()).to_f64())
}

/// Whether the gamma shape is restricted to the `(0, 1]` range covered by the
/// comparison inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ParamRange {
    #[default]
    Theorem,
    Unrestricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaResult {
    pub value: f64,
    pub n_used: usize,
    /// Magnitude of the last term added.
    pub tail_bound: f64,
}

impl KappaResult {
    const ZERO: KappaResult = KappaResult {
        value: 0.0,
        n_used: 0,
        tail_bound: 0.0,
    };
}

/// Acceptance-region moments `E[φ_n(X); p > t]` for `n = 1, 2, …`.
enum Moments {
    Gamma {
        ln_front: f64,
        alpha: f64,
        seq: PolySequence,
        n: u32,
    },
    Discrete {
        ln_mass: Vec<f64>,
        seqs: Vec<PolySequence>,
    },
    /// The acceptance region is empty.
    Empty,
}

impl Moments {
    fn new(marginal: Marginal, t: Probability) -> Result<Self> {
        Ok(match (marginal, marginal.rejection_region(t)?) {
            (Marginal::Gamma(p), RejectionRegion::Continuous { tau }) => {
                let alpha = p.alpha();
                Moments::Gamma {
                    ln_front: alpha * tau.ln() - tau - lgamma(alpha),
                    alpha,
                    seq: PolySequence::gamma_orthonormal(alpha + 1.0, tau)?,
                    n: 0,
                }
            }
            (_, RejectionRegion::Discrete { x0: None }) => Moments::Empty,
            (m, RejectionRegion::Discrete { x0: Some(x0) }) => {
                let mut ln_mass = Vec::with_capacity(x0 as usize + 1);
                let mut seqs = Vec::with_capacity(x0 as usize + 1);
                for x in 0..=x0 {
                    let mut s = m.orthonormal(x as f64)?;
                    s.next();
                    ln_mass.push(m.ln_density(x as f64));
                    seqs.push(s);
                }
                Moments::Discrete { ln_mass, seqs }
            }
            (m, r) => unreachable!("{m:?} with {r:?}"),
        })
    }

    fn is_empty(&self) -> bool {
        matches!(self, Moments::Empty)
    }

    fn next(&mut self) -> SignedLog {
        match self {
            Moments::Gamma {
                ln_front,
                alpha,
                seq,
                n,
            } => {
                *n += 1;
                let p = seq.next().expect("infinite");
                p.scale(*ln_front - 0.5 * (f64::from(*n) * *alpha).ln())
            }
            Moments::Discrete { ln_mass, seqs } => {
                let mut acc = NeumaierSum::new();
                for (w, s) in ln_mass.iter().zip(seqs.iter_mut()) {
                    acc += s.next().expect("infinite").scale(*w).to_f64();
                }
                SignedLog::from_f64(acc.value())
            }
            Moments::Empty => SignedLog::ZERO,
        }
    }
}

fn kappa_series(pair: &LancasterPair, t: Probability, trunc: Truncation) -> Result<KappaResult> {
    let t = Probability::open_unit(t.value())?;
    let rho = pair.rho();
    let mut a = Moments::new(pair.marginal(Coordinate::First), t)?;
    if rho == 0.0 || a.is_empty() {
        return Ok(KappaResult::ZERO);
    }
    let symmetric = pair.family().symmetric_marginal().is_some();
    let mut b = if symmetric {
        None
    } else {
        let m = Moments::new(pair.marginal(Coordinate::Second), t)?;
        if m.is_empty() {
            return Ok(KappaResult::ZERO);
        }
        Some(m)
    };
    let ln_rho = rho.ln();
    let mut sum = NeumaierSum::new();
    let mut stopper = TailStopper::new(trunc.tail_tol, rho);
    for n in 1..=trunc.n_max {
        let an = a.next();
        let bn = match b.as_mut() {
            Some(b) => b.next(),
            None => an,
        };
        let term = an.mul(bn).scale(n as f64 * ln_rho).to_f64();
        sum += term;
        if stopper.push(term.abs()) {
            return Ok(KappaResult {
                value: sum.value(),
                n_used: n,
                tail_bound: stopper.last(),
            });
        }
    }
    Err(Error::NonConvergence {
        n_max: trunc.n_max,
        last_term: stopper.last(),
    })
}

/// The first `n` terms `ρ^k a_k b_k`, `k = 1..=n`, of the covariance series.
pub fn kappa_terms(pair: &LancasterPair, t: Probability, n: usize) -> Result<Vec<f64>> {
    let t = Probability::open_unit(t.value())?;
    let mut a = Moments::new(pair.marginal(Coordinate::First), t)?;
    let mut b = match pair.family().symmetric_marginal() {
        Some(_) => None,
        None => Some(Moments::new(pair.marginal(Coordinate::Second), t)?),
    };
    let rho = pair.rho();
    Ok((1..=n)
        .map(|k| {
            let ak = a.next();
            let bk = b.as_mut().map_or(ak, Moments::next);
            if rho == 0.0 {
                0.0
            } else {
                ak.mul(bk).scale(k as f64 * rho.ln()).to_f64()
            }
        })
        .collect())
}

/// Indicator covariance for the bivariate gamma law.
pub fn kappa_gamma(
    alpha: f64,
    rho: f64,
    t: Probability,
    trunc: Truncation,
    range: ParamRange,
) -> Result<KappaResult> {
    let p = GammaParams::new(alpha)?;
    if range == ParamRange::Theorem && !p.in_theorem_range() {
        return Err(domain(format!(
            "gamma shape {alpha} outside (0, 1]; pass ParamRange::Unrestricted to explore it"
        )));
    }
    kappa_series(&LancasterPair::new(FamilyParams::Gamma(p), rho)?, t, trunc)
}

pub fn kappa_poisson(a: f64, rho: f64, t: Probability, trunc: Truncation) -> Result<KappaResult> {
    let fam = FamilyParams::Poisson(PoissonParams::new(a)?);
    kappa_series(&LancasterPair::new(fam, rho)?, t, trunc)
}

pub fn kappa_nb(beta: f64, c: f64, rho: f64, t: Probability, trunc: Truncation) -> Result<KappaResult> {
    let fam = FamilyParams::NegBinomial(NBParams::new(beta, c)?);
    kappa_series(&LancasterPair::new(fam, rho)?, t, trunc)
}

/// Indicator covariance for the gamma–negative binomial law; unlike the
/// symmetric families this series need not have nonnegative terms.
pub fn kappa_gamma_nb(
    alpha: f64,
    beta: f64,
    c: f64,
    rho: f64,
    t: Probability,
    trunc: Truncation,
) -> Result<KappaResult> {
    let fam = FamilyParams::GammaNb(crate::lancaster::GammaNBParams::new(alpha, beta, c)?);
    kappa_series(&LancasterPair::new(fam, rho)?, t, trunc)
}

/// Dispatches to the series of the pair's family.
pub fn kappa(pair: &LancasterPair, t: Probability, trunc: Truncation, range: ParamRange) -> Result<KappaResult> {
    if let FamilyParams::Gamma(p) = pair.family() {
        if range == ParamRange::Theorem && !p.in_theorem_range() {
            return Err(domain(format!(
                "gamma shape {} outside (0, 1]; pass ParamRange::Unrestricted to explore it",
                p.alpha()
            )));
        }
    }
    kappa_series(pair, t, trunc)
}

/// `P(X in A, Y in B) − P(X in A) P(Y in B)` by summing and integrating the
/// joint density minus the product of marginals over the acceptance regions.
/// Independent of the covariance series.
pub fn kappa_oracle(pair: &LancasterPair, t: Probability, trunc: Truncation, spec: QuadSpec) -> Result<f64> {
    let t = Probability::open_unit(t.value())?;
    let cut = |m: Marginal| -> Result<Option<f64>> {
        Ok(match m.rejection_region(t)? {
            RejectionRegion::Continuous { tau } => Some(tau),
            RejectionRegion::Discrete { x0 } => x0.map(|x| x as f64),
        })
    };
    let (Some(xc), Some(yc)) = (
        cut(pair.marginal(Coordinate::First))?,
        cut(pair.marginal(Coordinate::Second))?,
    ) else {
        return Ok(0.0);
    };
    lower_region_integral(pair, xc, yc, 1, trunc, spec)
}

/// Default accuracy of [`kappa_oracle`].
pub fn oracle_quad_spec() -> QuadSpec {
    QuadSpec {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_intervals: 2000,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonConstant {
    /// `sup |κ(ρ)| / ρ` over the grid.
    pub value: f64,
    pub argmax: f64,
    /// `(ρ, κ(ρ))` for every grid point, in grid order.
    pub kappas: Vec<(f64, f64)>,
}

/// `sup_{ρ in grid} |κ(ρ)| / ρ`, evaluated in parallel.
pub fn comparison_constant(
    family: FamilyParams,
    t: Probability,
    rho_grid: &[f64],
    trunc: Truncation,
    range: ParamRange,
) -> Result<ComparisonConstant> {
    if rho_grid.is_empty() {
        return Err(domain("comparison constant needs a nonempty ρ grid"));
    }
    if let Some(&r) = rho_grid.iter().find(|&&r| !(r > 0.0)) {
        return Err(domain(format!("grid point {r} is not positive")));
    }
    let kappas = rho_grid
        .par_iter()
        .map(|&rho| Ok((rho, kappa(&LancasterPair::new(family, rho)?, t, trunc, range)?.value)))
        .collect::<Result<Vec<_>>>()?;
    let (argmax, value) = kappas
        .iter()
        .map(|&(r, k)| (r, k.abs() / r))
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    Ok(ComparisonConstant {
        value,
        argmax,
        kappas,
    })
}

/// Pair classes of the variance decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairClass {
    /// `|ρ| = 1`: the pair is linearly dependent.
    E1,
    /// `|ρ| < 1`.
    E2,
}

impl PairClass {
    pub fn classify(rho: f64) -> PairClass {
        if rho.abs() == 1.0 {
            PairClass::E1
        } else {
            PairClass::E2
        }
    }
}

/// The majorant of `V[m^{−1} R_m(t)]` split into its three parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBound {
    pub value: f64,
    /// `π(1 − π) / m` with `π = P(p ≤ t)` under the null law.
    pub diagonal: f64,
    /// `C Σ_{E2} |ρ_ij| / m²`.
    pub e2: f64,
    /// `0.25 #E1 / m²`.
    pub e1: f64,
    pub constant: f64,
}

/// Comparison constant valid for every `|ρ| ≤ rho_max`.
///
/// For the symmetric families `κ(ρ)/ρ = Σ ρ^{n−1} q_n²` is nondecreasing and
/// `|κ(−ρ)| ≤ κ(ρ)`, so the supremum sits at `rho_max`.
pub fn symmetric_constant(family: FamilyParams, t: Probability, rho_max: f64, trunc: Truncation) -> Result<f64> {
    if family.symmetric_marginal().is_none() {
        return Err(domain("variance bounds need a family with equal marginals"));
    }
    if rho_max == 0.0 {
        return Ok(0.0);
    }
    Ok(comparison_constant(family, t, &[rho_max], trunc, ParamRange::Unrestricted)?.value)
}

fn assemble(m: usize, pi: f64, constant: f64, e2_abs: f64, e1_count: f64) -> VarianceBound {
    let mf = m as f64;
    let diagonal = pi * (1.0 - pi) / mf;
    let e2 = constant * e2_abs / (mf * mf);
    let e1 = 0.25 * e1_count / (mf * mf);
    VarianceBound {
        value: diagonal + e2 + e1,
        diagonal,
        e2,
        e1,
        constant,
    }
}

/// Variance majorant for an explicit correlation matrix whose pairs follow
/// `family` with the given correlations.
pub fn variance_bound_matrix(
    r: &CorrelationMatrix,
    family: FamilyParams,
    t: Probability,
    trunc: Truncation,
) -> Result<VarianceBound> {
    let marginal = family
        .symmetric_marginal()
        .ok_or_else(|| domain("variance bounds need a family with equal marginals"))?;
    let pi = marginal.rejection_probability(t)?;
    let (mut e2_abs, mut e1_count, mut rho_max) = (NeumaierSum::new(), 0.0, 0.0f64);
    for v in r.off_diagonal() {
        match PairClass::classify(v) {
            PairClass::E1 => e1_count += 1.0,
            PairClass::E2 => {
                e2_abs += v.abs();
                rho_max = rho_max.max(v.abs());
            }
        }
    }
    let constant = symmetric_constant(family, t, rho_max, trunc)?;
    Ok(assemble(r.dim(), pi, constant, e2_abs.value(), e1_count))
}

/// Variance majorant for a block design, using the null law for every
/// coordinate.
pub fn variance_bound_design(design: &DependenceDesign, t: Probability, trunc: Truncation) -> Result<VarianceBound> {
    design.validate()?;
    let constant = if design.rho == 1.0 {
        0.0
    } else {
        symmetric_constant(design.family, t, design.rho, trunc)?
    };
    let pi = design.null_marginal().rejection_probability(t)?;
    let pairs = design.within_block_pairs() as f64;
    let (e2_abs, e1_count) = match PairClass::classify(design.rho) {
        PairClass::E1 => (0.0, pairs),
        PairClass::E2 => (pairs * design.rho.abs(), 0.0),
    };
    Ok(assemble(design.m, pi, constant, e2_abs, e1_count))
}

/// `S_K = Σ_{N=1}^{K} E|Q_N|² / N` for every `K`.
pub fn lyons_partial_sums(varseq: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = varseq.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(domain(format!("second moment {v} outside [0, 1]")));
    }
    let mut acc = NeumaierSum::new();
    Ok(varseq
        .iter()
        .enumerate()
        .map(|(i, v)| {
            acc += v / (i + 1) as f64;
            acc.value()
        })
        .collect())
}

/// `C ζ(1 + δ)`, the limit majorant of `S_K` when `E|Q_N|² ≤ C N^{−δ}`.
pub fn lyons_majorant(constant: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(domain(format!("decay exponent {delta} must be positive")));
    }
    Ok(constant * riemann_zeta(1.0 + delta)?)
}

/// `E|Q_N|²` majorants from [`variance_bound_design`] applied to the template
/// at `m = 1, …, k_max`.
pub fn lyons_design_sequence(
    template: &DesignTemplate,
    t: Probability,
    k_max: usize,
    trunc: Truncation,
) -> Result<Vec<f64>> {
    let first = template.design(1)?;
    let constant = if template.rho == 1.0 || template.rho == 0.0 {
        0.0
    } else {
        symmetric_constant(first.family, t, template.rho, trunc)?
    };
    let pi = first.null_marginal().rejection_probability(t)?;
    (1..=k_max)
        .into_par_iter()
        .map(|m| {
            let d = template.design(m)?;
            let pairs = d.within_block_pairs() as f64;
            let (e2_abs, e1) = match PairClass::classify(d.rho) {
                PairClass::E1 => (0.0, pairs),
                PairClass::E2 => (pairs * d.rho.abs(), 0.0),
            };
            Ok(assemble(m, pi, constant, e2_abs, e1).value)
        })
        .collect()
}
