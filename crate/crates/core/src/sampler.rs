//! Random generation of Lancaster pairs and block-dependent statistic vectors.
//!
//! Exact constructions are used where one is known:
//!
//! - gamma: the Kibble mixture `K | X ~ Poisson(ρX/(1−ρ))`,
//!   `Y = (1−ρ) Gamma(α+K)`;
//! - Poisson: the common shock `(U+W, V+W)`;
//! - negative binomial: one step of a birth–death–immigration chain whose
//!   transition has the Meixner polynomials as eigenfunctions with
//!   eigenvalues `ρ^n`.
//!
//! Vectors share one latent driver per block. Each coordinate takes a `√ρ`
//! step from the driver (gamma, negative binomial) or shares the shock
//! (Poisson), so every within-block pair follows the Lancaster law with
//! correlation `ρ`. The gamma–negative binomial pair and any other pair law
//! can be drawn from a tabulated joint law through [`GridSampler`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::design::{AltSpec, DependenceDesign};
use crate::error::{domain, Error, Result};
use crate::lancaster::{
    joint_density, Coordinate, FamilyParams, LancasterPair, Marginal, Truncation,
};
use crate::orthopoly::PolySequence;
use crate::series::{NeumaierSum, TailStopper};
use crate::special::{gamma_cdf, gamma_quantile, gamma_upper_quantile, lgamma, GammaParams, NBParams};

/// The random stream of replication `replication` under `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn draw_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
}

fn draw_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        let v: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
        v as u64
    }
}

/// NB(`r`, `c`) as a gamma mixture of Poissons.
fn draw_nb<R: Rng + ?Sized>(rng: &mut R, r: f64, c: f64) -> u64 {
    if r <= 0.0 {
        return 0;
    }
    let g = draw_gamma(rng, r);
    draw_poisson(rng, g * c / (1.0 - c))
}

/// One Kibble step from `x`: the conditional law of `Y` given `X = x`.
fn kibble_step<R: Rng + ?Sized>(rng: &mut R, x: f64, alpha: f64, rho: f64) -> f64 {
    let k = draw_poisson(rng, rho * x / (1.0 - rho));
    (1.0 - rho) * draw_gamma(rng, alpha + k as f64)
}

/// One birth–death–immigration step from `x`: binomial thinning with survival
/// `1 − s`, `s = (1−ρ)/(1−cρ)`, then NB(β + survivors, `c(1−ρ)/(1−cρ)`) births.
fn bdi_step<R: Rng + ?Sized>(rng: &mut R, x: u64, beta: f64, c: f64, rho: f64) -> u64 {
    let s = (1.0 - rho) / (1.0 - c * rho);
    let survivors = if x == 0 || s >= 1.0 {
        0
    } else {
        Binomial::new(x, 1.0 - s).expect("valid probability").sample(rng)
    };
    survivors + draw_nb(rng, beta + survivors as f64, c * s)
}

/// A bivariate gamma pair via the Kibble mixture.
pub fn sample_pair_gamma<R: Rng + ?Sized>(rng: &mut R, alpha: f64, rho: f64) -> Result<(f64, f64)> {
    GammaParams::new(alpha)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(format!("gamma pairs need 0 ≤ ρ < 1, got {rho}")));
    }
    let x = draw_gamma(rng, alpha);
    Ok((x, kibble_step(rng, x, alpha, rho)))
}

/// A bivariate Poisson pair via the common shock.
pub fn sample_pair_poisson<R: Rng + ?Sized>(rng: &mut R, a: f64, rho: f64) -> Result<(u64, u64)> {
    if !(a > 0.0) || !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("Poisson pairs need a > 0 and 0 ≤ ρ ≤ 1, got ({a}, {rho})")));
    }
    let w = draw_poisson(rng, rho * a);
    let u = draw_poisson(rng, (1.0 - rho) * a);
    let v = draw_poisson(rng, (1.0 - rho) * a);
    Ok((u + w, v + w))
}

/// A bivariate negative binomial pair via one birth–death–immigration step.
pub fn sample_pair_nb<R: Rng + ?Sized>(rng: &mut R, beta: f64, c: f64, rho: f64) -> Result<(u64, u64)> {
    NBParams::new(beta, c)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(format!("negative binomial pairs need 0 ≤ ρ < 1, got {rho}")));
    }
    let x = draw_nb(rng, beta, c);
    Ok((x, bdi_step(rng, x, beta, c, rho)))
}

/// The shared-gamma mixing construction `G_k = A + B_k`, `A ~ Gamma(βr)`,
/// `B_k ~ Gamma(β(1−r))`, `r = ρ/c`, `X_k | G_k ~ Poisson(G_k c/(1−c))`.
///
/// Its Pearson correlation is `ρ`, but its canonical correlations are
/// `c^n (βr)_n / (β)_n`, not `ρ^n`, so it does not realize the Lancaster
/// negative binomial law for `n ≥ 2`. It is kept for comparison only and is
/// not used by any simulation path.
pub fn sample_pair_nb_shared_gamma<R: Rng + ?Sized>(
    rng: &mut R,
    beta: f64,
    c: f64,
    rho: f64,
) -> Result<(u64, u64)> {
    NBParams::new(beta, c)?;
    if !(0.0..=c).contains(&rho) {
        return Err(domain(format!("shared-gamma pairs need 0 ≤ ρ ≤ c, got {rho}")));
    }
    let r = rho / c;
    let shared = if r > 0.0 { draw_gamma(rng, beta * r) } else { 0.0 };
    let mut own = || if r < 1.0 { draw_gamma(rng, beta * (1.0 - r)) } else { 0.0 };
    let (g1, g2) = (shared + own(), shared + own());
    let scale = c / (1.0 - c);
    Ok((draw_poisson(rng, g1 * scale), draw_poisson(rng, g2 * scale)))
}

/// Sampler paths available for pair laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerPath {
    Kibble,
    CommonShock,
    BirthDeathImmigration,
    SharedGamma,
    Grid,
}

impl SamplerPath {
    /// Whether the path realizes the Lancaster kernel and may drive
    /// simulations.
    pub fn enabled(&self) -> bool {
        !matches!(self, SamplerPath::SharedGamma)
    }

    /// The exact path for a family, if one exists.
    pub fn exact_for(family: &FamilyParams) -> Option<SamplerPath> {
        match family {
            FamilyParams::Gamma(_) => Some(SamplerPath::Kibble),
            FamilyParams::Poisson(_) => Some(SamplerPath::CommonShock),
            FamilyParams::NegBinomial(_) => Some(SamplerPath::BirthDeathImmigration),
            FamilyParams::GammaNb(_) => None,
        }
    }
}

/// Draws a pair from its exact construction; gamma–NB needs [`GridSampler`].
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R, pair: &LancasterPair) -> Result<(f64, f64)> {
    let rho = pair.rho();
    match pair.family() {
        FamilyParams::Gamma(p) => sample_pair_gamma(rng, p.alpha(), rho),
        FamilyParams::Poisson(p) => {
            sample_pair_poisson(rng, p.a(), rho).map(|(x, y)| (x as f64, y as f64))
        }
        FamilyParams::NegBinomial(p) => {
            sample_pair_nb(rng, p.beta(), p.c(), rho).map(|(x, y)| (x as f64, y as f64))
        }
        FamilyParams::GammaNb(_) => Err(domain("gamma_nb pairs are drawn through GridSampler")),
    }
}

/// Marginal tail mass left outside tabulated grids.
pub const GRID_TAIL_MASS: f64 = 1e-10;
/// Largest clipped negative mass tolerated before a table is rejected.
pub const GRID_CLIP_LIMIT: f64 = 1e-6;
/// Quantile bins of a continuous coordinate.
pub const GAMMA_BINS: usize = 2000;
const SUB_BINS: usize = 16;

/// Inverse-CDF sampling from a tabulated pair law.
///
/// Discrete coordinates are tabulated up to a cut leaving tail mass below
/// [`GRID_TAIL_MASS`]. A gamma second coordinate is split into
/// [`GAMMA_BINS`] equal-probability bins whose joint masses come from exact
/// partial integrals of the orthonormal Laguerre polynomials; within a bin the
/// draw follows the gamma marginal. Negative cells left by truncation are
/// clipped and the table renormalized.
#[derive(Debug, Clone)]
pub struct GridSampler {
    cumulative: Vec<f64>,
    cols: usize,
    second: SecondAxis,
    /// Total clipped negative mass.
    pub clipped: f64,
    /// Total mass before renormalization.
    pub raw_mass: f64,
}

#[derive(Debug, Clone)]
enum SecondAxis {
    Discrete,
    /// Quantile table at `SUB_BINS` sub-edges per bin; the last entry is ∞.
    Gamma { params: GammaParams, edges: Vec<f64> },
}

impl GridSampler {
    /// Tabulates the pair law with the default clipping limit
    /// [`GRID_CLIP_LIMIT`].
    pub fn new(pair: &LancasterPair, trunc: Truncation) -> Result<Self> {
        Self::with_clip_limit(pair, trunc, GRID_CLIP_LIMIT)
    }

    /// Tabulates the pair law, failing when more than `clip_limit` of negative
    /// mass has to be clipped.
    ///
    /// The gamma–negative binomial series is a signed measure: its density is
    /// negative far in the gamma tail, so tables for larger `ρ` clip more
    /// than [`GRID_CLIP_LIMIT`] and need an explicit limit.
    pub fn with_clip_limit(pair: &LancasterPair, trunc: Truncation, clip_limit: f64) -> Result<Self> {
        let mx = pair.marginal(Coordinate::First);
        let my = pair.marginal(Coordinate::Second);
        if !mx.is_discrete() {
            return Err(domain("the grid sampler needs a discrete first coordinate"));
        }
        let x_cut = mx.tail_cut(GRID_TAIL_MASS)? as usize;
        let (cells, cols, second) = match my {
            Marginal::Gamma(g) => {
                let cells = gamma_bin_masses(pair, g, x_cut, trunc)?;
                let n = GAMMA_BINS * SUB_BINS;
                let mut edges: Vec<f64> = (0..n)
                    .map(|k| gamma_quantile(k as f64 / n as f64, &g))
                    .collect::<Result<_>>()?;
                edges.push(f64::INFINITY);
                (cells, GAMMA_BINS, SecondAxis::Gamma { params: g, edges })
            }
            _ => {
                let y_cut = my.tail_cut(GRID_TAIL_MASS)? as usize;
                let mut cells = Vec::with_capacity((x_cut + 1) * (y_cut + 1));
                for x in 0..=x_cut {
                    for y in 0..=y_cut {
                        cells.push(joint_density(pair, x as f64, y as f64, trunc)?.value);
                    }
                }
                (cells, y_cut + 1, SecondAxis::Discrete)
            }
        };
        let clipped = cells.iter().filter(|&&v| v < 0.0).fold(0.0, |acc, v| acc - v);
        if clipped > clip_limit {
            return Err(Error::ExcessiveClipping {
                clipped,
                limit: clip_limit,
            });
        }
        let mut acc = NeumaierSum::new();
        let mut cumulative: Vec<f64> = cells
            .iter()
            .map(|&v| {
                acc += v.max(0.0);
                acc.value()
            })
            .collect();
        let raw_mass = acc.value();
        for c in &mut cumulative {
            *c /= raw_mass;
        }
        Ok(Self {
            cumulative,
            cols,
            second,
            clipped,
            raw_mass,
        })
    }

    /// Factor applied to the clipped table to restore unit mass.
    pub fn renormalization(&self) -> f64 {
        1.0 / self.raw_mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let (x, col) = (idx / self.cols, idx % self.cols);
        let y = match &self.second {
            SecondAxis::Discrete => col as f64,
            SecondAxis::Gamma { params, edges } => {
                let v: f64 = rng.random::<f64>() * SUB_BINS as f64;
                let sub = (v as usize).min(SUB_BINS - 1);
                let frac = v - sub as f64;
                let k = col * SUB_BINS + sub;
                if edges[k + 1].is_finite() {
                    edges[k] + frac * (edges[k + 1] - edges[k])
                } else {
                    let n = (GAMMA_BINS * SUB_BINS) as f64;
                    gamma_upper_quantile((1.0 - frac) / n, params).unwrap_or(edges[k])
                }
            }
        };
        (x as f64, y)
    }
}

/// Joint masses `P(X = x, Y in bin k)` for the gamma–NB table, row-major.
fn gamma_bin_masses(
    pair: &LancasterPair,
    g: GammaParams,
    x_cut: usize,
    trunc: Truncation,
) -> Result<Vec<f64>> {
    let mx = pair.marginal(Coordinate::First);
    let rho = pair.rho();
    let alpha = g.alpha();
    // edges of the equal-probability bins; the last is ∞
    let edges: Vec<f64> = (1..GAMMA_BINS)
        .map(|k| gamma_quantile(k as f64 / GAMMA_BINS as f64, &g))
        .collect::<Result<_>>()?;
    // row coefficients f(x) ρ^n φ_n(x), truncated once every row is negligible
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); x_cut + 1];
    let mut seqs: Vec<PolySequence> = (0..=x_cut)
        .map(|x| mx.orthonormal(x as f64))
        .collect::<Result<_>>()?;
    let mut stopper = TailStopper::new(trunc.tail_tol * 1e-2, rho);
    let mut converged = rho == 0.0;
    for n in 0..trunc.n_max {
        let mut largest = 0.0f64;
        for (x, (row, seq)) in rows.iter_mut().zip(seqs.iter_mut()).enumerate() {
            let v = seq
                .next()
                .expect("infinite")
                .scale(mx.ln_density(x as f64) + n as f64 * rho.ln())
                .to_f64();
            let v = if rho == 0.0 && n > 0 { 0.0 } else { v };
            largest = largest.max(v.abs());
            row.push(v);
        }
        if converged || stopper.push(largest) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            n_max: trunc.n_max,
            last_term: stopper.last(),
        });
    }
    let n_terms = rows[0].len();
    // partial moments R_n(e) = ∫_0^e g ψ_n at every edge, with R_n(0) = 0
    // and R_n(∞) = δ_{n0}
    let ln_front = |y: f64| alpha * y.ln() - y - lgamma(alpha);
    let mut moments = vec![vec![0.0; GAMMA_BINS + 1]; n_terms];
    moments[0][GAMMA_BINS] = 1.0;
    for (k, &e) in edges.iter().enumerate() {
        moments[0][k + 1] = gamma_cdf(e, &g);
        let mut seq = PolySequence::gamma_orthonormal(alpha + 1.0, e)?;
        for (n, row) in moments.iter_mut().enumerate().skip(1) {
            row[k + 1] = seq
                .next()
                .expect("infinite")
                .scale(ln_front(e) - 0.5 * (n as f64 * alpha).ln())
                .to_f64();
        }
    }
    let mut cells = Vec::with_capacity((x_cut + 1) * GAMMA_BINS);
    for row in &rows {
        for k in 0..GAMMA_BINS {
            let mass: NeumaierSum = row
                .iter()
                .zip(&moments)
                .map(|(c, r)| c * (r[k + 1] - r[k]))
                .collect();
            cells.push(mass.value());
        }
    }
    Ok(cells)
}

/// Test statistics of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticVector {
    pub values: Vec<f64>,
    /// `true` where the null hypothesis holds.
    pub null_mask: Vec<bool>,
}

/// Draws the statistic vector of a design from `rng`.
///
/// The null layout is drawn first, then blocks in order. Alternative
/// coordinates are the null draws transformed by the design's alternative, so
/// null coordinates keep the family marginal exactly.
pub fn sample_vector<R: Rng + ?Sized>(design: &DependenceDesign, rng: &mut R) -> Result<StatisticVector> {
    design.validate()?;
    let m = design.m;
    let m0 = design.m0();
    let mut null_mask: Vec<bool> = (0..m).map(|i| i < m0).collect();
    if design.null_layout == crate::design::NullLayout::Random && m0 > 0 && m0 < m {
        null_mask.shuffle(rng);
    }
    let mut values = Vec::with_capacity(m);
    let rho = design.rho;
    let root = rho.sqrt();
    for (_, len) in design.blocks() {
        match design.family {
            FamilyParams::Gamma(p) => {
                let alpha = p.alpha();
                if len == 1 || rho == 0.0 {
                    values.extend((0..len).map(|_| draw_gamma(rng, alpha)));
                } else {
                    let driver = draw_gamma(rng, alpha);
                    values.extend((0..len).map(|_| kibble_step(rng, driver, alpha, root)));
                }
            }
            FamilyParams::Poisson(p) => {
                let a = p.a();
                let shared = if len == 1 { 0 } else { draw_poisson(rng, rho * a) };
                let own = if len == 1 { a } else { (1.0 - rho) * a };
                values.extend((0..len).map(|_| (shared + draw_poisson(rng, own)) as f64));
            }
            FamilyParams::NegBinomial(p) => {
                let (beta, c) = (p.beta(), p.c());
                if len == 1 || rho == 0.0 {
                    values.extend((0..len).map(|_| draw_nb(rng, beta, c) as f64));
                } else {
                    let driver = draw_nb(rng, beta, c);
                    values.extend((0..len).map(|_| bdi_step(rng, driver, beta, c, root) as f64));
                }
            }
            FamilyParams::GammaNb(_) => unreachable!("rejected by validation"),
        }
    }
    if m0 < m {
        let alt = design.alt.expect("validated");
        for (v, &is_null) in values.iter_mut().zip(&null_mask) {
            if is_null {
                continue;
            }
            *v = match (design.family, alt) {
                (FamilyParams::Gamma(_), AltSpec::ScaleFactor(s)) => *v * s,
                (FamilyParams::Poisson(_), AltSpec::MeanShift(d)) => *v + draw_poisson(rng, d) as f64,
                (FamilyParams::NegBinomial(p), AltSpec::MeanShift(d)) => {
                    let c = p.c();
                    *v + draw_nb(rng, d * (1.0 - c) / c, c) as f64
                }
                _ => unreachable!("rejected by validation"),
            };
        }
    }
    Ok(StatisticVector { values, null_mask })
}

/// The `(seed, replication)` stream for a design, as used by simulations.
pub fn sample_replication(design: &DependenceDesign, replication: u64) -> Result<StatisticVector> {
    sample_vector(design, &mut replication_rng(design.seed, replication))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::PoissonParams;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| replication_rng(9, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| replication_rng(9, 3).random()).collect();
        assert_eq!(a, b);
        let x: u64 = replication_rng(9, 3).random();
        let y: u64 = replication_rng(9, 4).random();
        assert_ne!(x, y);
    }

    #[test]
    fn degenerate_correlations() {
        let mut rng = replication_rng(1, 0);
        for _ in 0..100 {
            let (x, y) = sample_pair_poisson(&mut rng, 3.0, 1.0).unwrap();
            assert_eq!(x, y);
        }
        assert!(sample_pair_gamma(&mut rng, 1.0, 1.0).is_err());
        assert!(sample_pair_nb_shared_gamma(&mut rng, 2.0, 0.5, 0.6).is_err());
    }

    #[test]
    fn grid_rejects_continuous_first_coordinate() {
        let pair = LancasterPair::new(FamilyParams::Gamma(GammaParams::new(1.0).unwrap()), 0.3).unwrap();
        assert!(GridSampler::new(&pair, Truncation::default()).is_err());
    }

    #[test]
    fn poisson_grid_has_unit_mass() {
        let pair = LancasterPair::new(FamilyParams::Poisson(PoissonParams::new(2.0).unwrap()), 0.4).unwrap();
        let g = GridSampler::new(&pair, Truncation::default()).unwrap();
        assert!((g.raw_mass - 1.0).abs() < 1e-9);
        assert_eq!(g.clipped, 0.0);
    }

    #[test]
    fn null_count_is_exact() {
        let d = DependenceDesign {
            m: 101,
            block_size: 10,
            rho: 0.5,
            family: FamilyParams::Poisson(PoissonParams::new(2.0).unwrap()),
            pi0: 0.8,
            alt: Some(AltSpec::MeanShift(3.0)),
            null_layout: crate::design::NullLayout::Random,
            seed: 11,
        };
        let v = sample_replication(&d, 0).unwrap();
        assert_eq!(v.values.len(), 101);
        assert_eq!(v.null_mask.iter().filter(|&&b| b).count(), 81);
        assert_eq!(v, sample_replication(&d, 0).unwrap());
    }
}
