//! The four Lancaster bivariate laws
//!
//! `h(x, y) = f(x) g(y) Σ_n ρ^n φ_n(x) ψ_n(y)`
//!
//! with orthonormal polynomial systems `φ_n`, `ψ_n` of the marginals: Laguerre
//! for gamma, Charlier for Poisson, Meixner for negative binomial, and the
//! mixed Meixner–Laguerre kernel for the gamma–negative binomial pair.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::orthopoly::PolySequence;
use crate::quadrature::{integrate, integrate_2d, QuadSpec};
use crate::series::{NeumaierSum, TailStopper};
use crate::special::{
    gamma_pdf, gamma_sf, gamma_upper_quantile, lgamma, ln_gamma_pdf, ln_nb_pmf, ln_poisson_pmf,
    nb_sf, nb_upper_threshold, poisson_sf, poisson_upper_threshold, GammaParams, NBParams,
    PoissonParams, Probability,
};

/// Parameters of the mixed gamma–negative binomial law. The first coordinate
/// is negative binomial, the second gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGammaNb", into = "RawGammaNb")]
pub struct GammaNBParams {
    pub gamma: GammaParams,
    pub nb: NBParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGammaNb {
    alpha: f64,
    beta: f64,
    c: f64,
}

impl TryFrom<RawGammaNb> for GammaNBParams {
    type Error = Error;
    fn try_from(r: RawGammaNb) -> Result<Self> {
        GammaNBParams::new(r.alpha, r.beta, r.c)
    }
}

impl From<GammaNBParams> for RawGammaNb {
    fn from(p: GammaNBParams) -> Self {
        RawGammaNb {
            alpha: p.gamma.alpha(),
            beta: p.nb.beta(),
            c: p.nb.c(),
        }
    }
}

impl GammaNBParams {
    pub fn new(alpha: f64, beta: f64, c: f64) -> Result<Self> {
        Ok(Self {
            gamma: GammaParams::new(alpha)?,
            nb: NBParams::new(beta, c)?,
        })
    }
}

/// One of the four Lancaster families, tagged by `kind` when serialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyParams {
    Gamma(GammaParams),
    Poisson(PoissonParams),
    NegBinomial(NBParams),
    GammaNb(GammaNBParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    First,
    Second,
}

impl FamilyParams {
    pub fn marginal(&self, coordinate: Coordinate) -> Marginal {
        match (*self, coordinate) {
            (FamilyParams::Gamma(p), _) => Marginal::Gamma(p),
            (FamilyParams::Poisson(p), _) => Marginal::Poisson(p),
            (FamilyParams::NegBinomial(p), _) => Marginal::NegBinomial(p),
            (FamilyParams::GammaNb(p), Coordinate::First) => Marginal::NegBinomial(p.nb),
            (FamilyParams::GammaNb(p), Coordinate::Second) => Marginal::Gamma(p.gamma),
        }
    }

    /// The common marginal of a symmetric family; `None` for gamma–NB.
    pub fn symmetric_marginal(&self) -> Option<Marginal> {
        match self {
            FamilyParams::GammaNb(_) => None,
            _ => Some(self.marginal(Coordinate::First)),
        }
    }

    /// Largest admissible canonical correlation and whether it is attained.
    pub fn rho_limit(&self) -> (f64, bool) {
        match self {
            FamilyParams::Gamma(_) | FamilyParams::NegBinomial(_) => (1.0, false),
            FamilyParams::Poisson(_) => (1.0, true),
            FamilyParams::GammaNb(p) => (p.nb.c().sqrt(), true),
        }
    }

    pub fn check_rho(&self, rho: f64) -> Result<()> {
        let (limit, inclusive) = self.rho_limit();
        let ok = rho >= 0.0 && if inclusive { rho <= limit } else { rho < limit };
        if ok {
            Ok(())
        } else {
            let bracket = if inclusive { ']' } else { ')' };
            Err(domain(format!(
                "canonical correlation {rho} outside [0, {limit}{bracket} for {}",
                self.name()
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyParams::Gamma(_) => "gamma",
            FamilyParams::Poisson(_) => "poisson",
            FamilyParams::NegBinomial(_) => "neg_binomial",
            FamilyParams::GammaNb(_) => "gamma_nb",
        }
    }
}

/// A single-coordinate law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Gamma(GammaParams),
    Poisson(PoissonParams),
    NegBinomial(NBParams),
}

/// The rejection event `{p ≤ t}` expressed on the statistic scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RejectionRegion {
    /// Reject when `x ≥ tau`.
    Continuous { tau: f64 },
    /// Reject when `x > x0`; `None` rejects every outcome.
    Discrete { x0: Option<u64> },
}

impl RejectionRegion {
    pub fn rejects(&self, x: f64) -> bool {
        match *self {
            RejectionRegion::Continuous { tau } => x >= tau,
            RejectionRegion::Discrete { x0: None } => true,
            RejectionRegion::Discrete { x0: Some(x0) } => x > x0 as f64,
        }
    }
}

impl Marginal {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, Marginal::Gamma(_))
    }

    pub fn check_support(&self, x: f64) -> Result<()> {
        let ok = match self {
            Marginal::Gamma(_) => x >= 0.0 && x.is_finite(),
            _ => x >= 0.0 && x.is_finite() && x.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("{x} is outside the support of {self:?}")))
        }
    }

    /// Log density (gamma) or log mass (discrete); the point must be on support.
    pub fn ln_density(&self, x: f64) -> f64 {
        match self {
            Marginal::Gamma(p) => ln_gamma_pdf(x, p),
            Marginal::Poisson(p) => ln_poisson_pmf(x as u64, p),
            Marginal::NegBinomial(p) => ln_nb_pmf(x as u64, p),
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match self {
            Marginal::Gamma(p) => gamma_pdf(x, p),
            _ => self.ln_density(x).exp(),
        })
    }

    /// `P(X > x)`; for discrete laws `x` is floored first.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Marginal::Gamma(p) => gamma_sf(x, p),
            _ if x < 0.0 => 1.0,
            Marginal::Poisson(p) => poisson_sf(x.floor() as u64, p),
            Marginal::NegBinomial(p) => nb_sf(x.floor() as u64, p),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.sf(x)
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Gamma(p) => p.alpha(),
            Marginal::Poisson(p) => p.a(),
            Marginal::NegBinomial(p) => p.mean(),
        }
    }

    pub fn rejection_region(&self, t: Probability) -> Result<RejectionRegion> {
        Ok(match self {
            Marginal::Gamma(p) => RejectionRegion::Continuous {
                tau: gamma_upper_quantile(Probability::open_unit(t.value())?.value(), p)?,
            },
            Marginal::Poisson(p) => RejectionRegion::Discrete {
                x0: poisson_upper_threshold(t, p)?,
            },
            Marginal::NegBinomial(p) => RejectionRegion::Discrete {
                x0: nb_upper_threshold(t, p)?,
            },
        })
    }

    /// `P(p ≤ t)` under this law: `t` for the gamma, `P(X > x0)` otherwise.
    pub fn rejection_probability(&self, t: Probability) -> Result<f64> {
        Ok(match self.rejection_region(t)? {
            RejectionRegion::Continuous { .. } => t.value(),
            RejectionRegion::Discrete { x0: None } => 1.0,
            RejectionRegion::Discrete { x0: Some(x0) } => self.sf(x0 as f64),
        })
    }

    /// Orthonormal polynomials of this law evaluated at `x`.
    pub fn orthonormal(&self, x: f64) -> Result<PolySequence> {
        self.check_support(x)?;
        match self {
            Marginal::Gamma(p) => PolySequence::gamma_orthonormal(p.alpha(), x),
            Marginal::Poisson(p) => PolySequence::charlier(p.a(), x as u64),
            Marginal::NegBinomial(p) => PolySequence::meixner(p.beta(), p.c(), x as u64),
        }
    }

    /// Point beyond which the law carries less than `mass`.
    pub fn tail_cut(&self, mass: f64) -> Result<f64> {
        match self {
            Marginal::Gamma(p) => gamma_upper_quantile(mass, p),
            _ => {
                let mut x = self.mean().floor();
                while self.sf(x) >= mass {
                    x += 1.0;
                }
                Ok(x)
            }
        }
    }

    /// `ln` of the density times `dx/du` under `x = u^{1/α}`, which removes
    /// the `x^{α−1}` singularity of small gamma shapes. Discrete laws use the
    /// plain log mass.
    pub(crate) fn ln_weight_substituted(&self, x: f64) -> f64 {
        match self {
            Marginal::Gamma(p) => -x - lgamma(p.alpha()) - p.alpha().ln(),
            _ => self.ln_density(x),
        }
    }
}

/// Series truncation: at most `n_max` terms; stop once three consecutive terms
/// fall below `tail_tol` and the geometric tail bound agrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTruncation")]
pub struct Truncation {
    pub n_max: usize,
    pub tail_tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTruncation {
    n_max: usize,
    tail_tol: f64,
}

impl TryFrom<RawTruncation> for Truncation {
    type Error = Error;
    fn try_from(r: RawTruncation) -> Result<Self> {
        Truncation::new(r.n_max, r.tail_tol)
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            n_max: 400,
            tail_tol: 1e-12,
        }
    }
}

impl Truncation {
    pub fn new(n_max: usize, tail_tol: f64) -> Result<Self> {
        if n_max < 1 || !(tail_tol > 0.0) {
            return Err(domain(format!(
                "truncation needs n_max ≥ 1 and tail_tol > 0, got ({n_max}, {tail_tol})"
            )));
        }
        Ok(Self { n_max, tail_tol })
    }
}

/// A truncated series value with the magnitude of its last term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub last_term: f64,
    pub n_used: usize,
}

/// A family with a canonical correlation in its admissible range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LancasterPair {
    family: FamilyParams,
    rho: f64,
}

impl LancasterPair {
    pub fn new(family: FamilyParams, rho: f64) -> Result<Self> {
        family.check_rho(rho)?;
        Ok(Self { family, rho })
    }

    pub fn family(&self) -> FamilyParams {
        self.family
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn marginal(&self, coordinate: Coordinate) -> Marginal {
        self.family.marginal(coordinate)
    }
}

/// Exact marginal density or mass of one coordinate.
pub fn marginal(family: FamilyParams, coordinate: Coordinate, x: f64) -> Result<f64> {
    family.marginal(coordinate).density(x)
}

/// `exp(ln_weight) · Σ_{n ≥ start} ρ^n φ_n(x) ψ_n(y)`.
pub(crate) fn weighted_kernel(
    pair: &LancasterPair,
    x: f64,
    y: f64,
    ln_weight: f64,
    start: usize,
    trunc: Truncation,
) -> Result<SeriesValue> {
    let mut px = pair.marginal(Coordinate::First).orthonormal(x)?;
    let mut py = pair.marginal(Coordinate::Second).orthonormal(y)?;
    let rho = pair.rho;
    if rho == 0.0 {
        let value = if start == 0 { ln_weight.exp() } else { 0.0 };
        return Ok(SeriesValue {
            value,
            last_term: value.abs(),
            n_used: 1,
        });
    }
    if rho >= 1.0 {
        return Err(domain("the kernel series diverges at ρ = 1"));
    }
    let ln_rho = rho.ln();
    let mut sum = NeumaierSum::new();
    let mut stopper = TailStopper::new(trunc.tail_tol, rho);
    for n in 0..trunc.n_max {
        let (a, b) = (px.next(), py.next());
        if n < start {
            continue;
        }
        let (a, b) = (a.expect("infinite"), b.expect("infinite"));
        let term = a.mul(b).scale(ln_weight + n as f64 * ln_rho).to_f64();
        sum += term;
        if stopper.push(term.abs()) {
            return Ok(SeriesValue {
                value: sum.value(),
                last_term: stopper.last(),
                n_used: n + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        n_max: trunc.n_max,
        last_term: stopper.last(),
    })
}

/// Truncated Lancaster density (or mass) at `(x, y)`.
///
/// Values are returned unchanged, including negative ones. Truncation can produce small negatives, and the gamma–negative-binomial series is a signed measure for some ρ.
pub fn joint_density(pair: &LancasterPair, x: f64, y: f64, trunc: Truncation) -> Result<SeriesValue> {
    let mx = pair.marginal(Coordinate::First);
    let my = pair.marginal(Coordinate::Second);
    mx.check_support(x)?;
    my.check_support(y)?;
    weighted_kernel(pair, x, y, mx.ln_density(x) + my.ln_density(y), 0, trunc)
}

/// Total truncated mass on `[0, x_cut] × [0, y_cut]`, summing over discrete
/// coordinates and integrating over continuous ones.
pub fn grid_mass(pair: &LancasterPair, trunc: Truncation, x_cut: f64, y_cut: f64) -> Result<f64> {
    lower_region_integral(pair, x_cut, y_cut, 0, trunc, QuadSpec {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        max_intervals: 2000,
    })
}

/// `∫∫_{[0,x_cut]×[0,y_cut]} f g Σ_{n ≥ start} ρ^n φ_n ψ_n`, summing discrete
/// coordinates and integrating gamma coordinates in `u = x^α`.
pub(crate) fn lower_region_integral(
    pair: &LancasterPair,
    x_cut: f64,
    y_cut: f64,
    start: usize,
    trunc: Truncation,
    spec: QuadSpec,
) -> Result<f64> {
    let mx = pair.marginal(Coordinate::First);
    let my = pair.marginal(Coordinate::Second);
    let term = |x: f64, y: f64| -> Result<f64> {
        let w = mx.ln_weight_substituted(x) + my.ln_weight_substituted(y);
        Ok(weighted_kernel(pair, x, y, w, start, trunc)?.value)
    };
    match (mx, my) {
        (Marginal::Gamma(gx), Marginal::Gamma(gy)) => {
            let (ax, ay) = (gx.alpha(), gy.alpha());
            let r = integrate_2d(
                |u, v| term(u.powf(1.0 / ax), v.powf(1.0 / ay)),
                (0.0, x_cut.powf(ax)),
                (0.0, y_cut.powf(ay)),
                spec,
            )?;
            Ok(r.value)
        }
        (_, Marginal::Gamma(gy)) => {
            let ay = gy.alpha();
            let mut acc = NeumaierSum::new();
            for x in 0..=(x_cut.floor() as u64) {
                let x = x as f64;
                acc += integrate(|v| term(x, v.powf(1.0 / ay)), 0.0, y_cut.powf(ay), spec)?.value;
            }
            Ok(acc.value())
        }
        (Marginal::Gamma(_), _) => Err(domain("the gamma coordinate of a mixed pair is the second")),
        _ => {
            let mut acc = NeumaierSum::new();
            for x in 0..=(x_cut.floor() as u64) {
                for y in 0..=(y_cut.floor() as u64) {
                    acc += term(x as f64, y as f64)?;
                }
            }
            Ok(acc.value())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma(alpha: f64) -> FamilyParams {
        FamilyParams::Gamma(GammaParams::new(alpha).unwrap())
    }

    fn poisson(a: f64) -> FamilyParams {
        FamilyParams::Poisson(PoissonParams::new(a).unwrap())
    }

    fn nb(beta: f64, c: f64) -> FamilyParams {
        FamilyParams::NegBinomial(NBParams::new(beta, c).unwrap())
    }

    fn gnb(alpha: f64, beta: f64, c: f64) -> FamilyParams {
        FamilyParams::GammaNb(GammaNBParams::new(alpha, beta, c).unwrap())
    }

    #[test]
    fn rho_ranges() {
        assert!(LancasterPair::new(gamma(1.0), 1.0).is_err());
        assert!(LancasterPair::new(poisson(1.0), 1.0).is_ok());
        assert!(LancasterPair::new(nb(1.0, 0.5), -0.1).is_err());
        assert!(LancasterPair::new(gnb(1.0, 2.0, 0.25), 0.5).is_ok());
        assert!(LancasterPair::new(gnb(1.0, 2.0, 0.25), 0.51).is_err());
    }

    #[test]
    fn poisson_at_unit_rho_is_rejected_by_the_series() {
        let pair = LancasterPair::new(poisson(2.0), 1.0).unwrap();
        assert!(joint_density(&pair, 1.0, 1.0, Truncation::default()).is_err());
    }

    #[test]
    fn independence_gives_product() {
        let t = Truncation::default();
        for fam in [gamma(0.7), poisson(2.0), nb(2.0, 0.4), gnb(1.5, 2.0, 0.3)] {
            let pair = LancasterPair::new(fam, 0.0).unwrap();
            let h = joint_density(&pair, 2.0, 3.0, t).unwrap().value;
            let want = marginal(fam, Coordinate::First, 2.0).unwrap()
                * marginal(fam, Coordinate::Second, 3.0).unwrap();
            assert!((h - want).abs() <= 1e-15 * want, "{fam:?}");
        }
    }

    #[test]
    fn marginal_examples() {
        assert!((marginal(gamma(1.0), Coordinate::First, 0.7).unwrap() - (-0.7f64).exp()).abs() < 1e-15);
        assert!((marginal(nb(2.0, 0.5), Coordinate::First, 0.0).unwrap() - 0.25).abs() < 1e-15);
        let g = marginal(gnb(0.5, 2.0, 0.5), Coordinate::Second, 1.0).unwrap();
        assert!((g - (-1f64).exp() / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!(marginal(poisson(2.0), Coordinate::First, 1.5).is_err());
        assert!(marginal(gnb(0.5, 2.0, 0.5), Coordinate::First, 0.5).is_err());
    }

    #[test]
    fn symmetric_families_are_symmetric() {
        let t = Truncation::default();
        for fam in [gamma(0.6), poisson(1.3), nb(1.5, 0.35)] {
            let pair = LancasterPair::new(fam, 0.55).unwrap();
            let a = joint_density(&pair, 1.0, 4.0, t).unwrap().value;
            let b = joint_density(&pair, 4.0, 1.0, t).unwrap().value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn poisson_grid_mass() {
        let pair = LancasterPair::new(poisson(2.0), 0.4).unwrap();
        let m = grid_mass(&pair, Truncation::default(), 60.0, 60.0).unwrap();
        assert!((m - 1.0).abs() < 1e-8, "{m}");
    }

    #[test]
    fn rejection_regions() {
        let t = Probability::new(0.05).unwrap();
        let p = Marginal::Poisson(PoissonParams::new(2.0).unwrap());
        assert_eq!(p.rejection_region(t).unwrap(), RejectionRegion::Discrete { x0: Some(4) });
        let g = Marginal::Gamma(GammaParams::new(1.0).unwrap());
        match g.rejection_region(t).unwrap() {
            RejectionRegion::Continuous { tau } => assert!((tau - 20f64.ln()).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        let pr = p.rejection_probability(t).unwrap();
        assert_eq!(pr, p.sf(4.0));
        assert!(pr > 0.05 && p.sf(5.0) <= 0.05);
    }

    #[test]
    fn family_json_roundtrip() {
        let fam = gnb(1.0, 2.0, 0.25);
        let s = serde_json::to_string(&fam).unwrap();
        assert_eq!(serde_json::from_str::<FamilyParams>(&s).unwrap(), fam);
        let g: FamilyParams = serde_json::from_str(r#"{"kind":"gamma","alpha":0.5}"#).unwrap();
        assert_eq!(g, gamma(0.5));
        assert!(serde_json::from_str::<FamilyParams>(r#"{"kind":"gamma","alpha":0.5,"x":1}"#).is_err());
        assert!(serde_json::from_str::<FamilyParams>(r#"{"kind":"poisson","a":-1}"#).is_err());
    }
}
