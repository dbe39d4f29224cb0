//! Multiple-testing layer: p-values, rejection counts, FDP, the plug-in FDP
//! estimator and convergence sweeps over growing numbers of tests.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{DependenceDesign, DesignTemplate};
use crate::error::{domain, Error, Result};
use crate::lancaster::{FamilyParams, Marginal};
use crate::sampler::{sample_replication, StatisticVector};
use crate::special::Probability;
use crate::stats::{log_log_slope, median, RunningStats};

/// Default Storey tuning parameter.
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// `p_i = 1 − F(ζ_i)` under the null law of a symmetric family.
pub fn pvalues(stats: &StatisticVector, family: FamilyParams) -> Result<Vec<f64>> {
    let marginal = family
        .symmetric_marginal()
        .ok_or_else(|| domain("p-values need a family with equal marginals"))?;
    null_pvalues(&stats.values, marginal)
}

/// `1 − F(ζ)` for every statistic.
pub fn null_pvalues(values: &[f64], marginal: Marginal) -> Result<Vec<f64>> {
    for &v in values {
        marginal.check_support(v)?;
    }
    if !marginal.is_discrete() {
        return Ok(values.par_iter().map(|&v| marginal.sf(v)).collect());
    }
    let top = values.iter().copied().fold(0.0, f64::max) as usize;
    let table: Vec<f64> = (0..=top).into_par_iter().map(|x| marginal.sf(x as f64)).collect();
    Ok(values.iter().map(|&v| table[v as usize]).collect())
}

/// Per-replication multiple-testing record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MtpOutcome {
    pub r: usize,
    pub v: usize,
    pub fdp: f64,
    /// Plug-in FDP estimate, when computed.
    pub theta: Option<f64>,
    pub m: usize,
    pub m0: usize,
    pub t: f64,
}

/// `R = #{p_i ≤ t}`, `V = #{null i : p_i ≤ t}`, `FDP = V / max(R, 1)`.
pub fn count(p: &[f64], null_mask: &[bool], t: Probability) -> Result<MtpOutcome> {
    if p.len() != null_mask.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: null_mask.len(),
        });
    }
    let t = t.value();
    let (mut r, mut v) = (0, 0);
    for (&pi, &null) in p.iter().zip(null_mask) {
        if pi <= t {
            r += 1;
            if null {
                v += 1;
            }
        }
    }
    Ok(MtpOutcome {
        r,
        v,
        fdp: v as f64 / r.max(1) as f64,
        theta: None,
        m: p.len(),
        m0: null_mask.iter().filter(|&&b| b).count(),
        t,
    })
}

/// Storey's `π̂0 = #{p_i > λ} / ((1 − λ) m)`, clipped to `[1/m, 1]`.
pub fn storey_pi0(p: &[f64], lambda: Probability) -> Result<f64> {
    let lambda = Probability::open_unit(lambda.value())?.value();
    if p.is_empty() {
        return Err(domain("Storey's estimator needs at least one p-value"));
    }
    let m = p.len() as f64;
    let above = p.iter().filter(|&&x| x > lambda).count() as f64;
    Ok((above / ((1.0 - lambda) * m)).clamp(1.0 / m, 1.0))
}

/// `ϑ = π̂0 P(p0 ≤ t) / (max(R, 1) / m̃)`.
pub fn theta_estimator(pi0_hat: f64, p0_at_t: Probability, r: usize, m_tilde: usize) -> Result<f64> {
    if m_tilde == 0 {
        return Err(domain("m̃ must be at least 1"));
    }
    Ok(pi0_hat * p0_at_t.value() / (r.max(1) as f64 / m_tilde as f64))
}

/// Settings shared by simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSpec {
    pub t: Probability,
    pub lambda: Probability,
    pub replications: usize,
}

/// Outcomes of replications `0 .. replications`, in replication order.
pub fn simulate(design: &DependenceDesign, spec: SimulationSpec) -> Result<Vec<MtpOutcome>> {
    design.validate()?;
    let marginal = design.null_marginal();
    let p0 = Probability::new(marginal.rejection_probability(spec.t)?)?;
    (0..spec.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let stats = sample_replication(design, rep)?;
            let p = null_pvalues(&stats.values, marginal)?;
            let mut out = count(&p, &stats.null_mask, spec.t)?;
            let pi0 = storey_pi0(&p, spec.lambda)?;
            out.theta = Some(theta_estimator(pi0, p0, out.r, design.m)?);
            Ok(out)
        })
        .collect()
}

/// Writes outcomes as CSV with columns `m,replication,R,V,fdp,theta`.
pub fn write_csv<W: Write>(mut w: W, outcomes: &[MtpOutcome]) -> std::io::Result<()> {
    writeln!(w, "m,replication,R,V,fdp,theta")?;
    for (rep, o) in outcomes.iter().enumerate() {
        let theta = o.theta.map_or(String::from("NaN"), |v| format!("{v:.16e}"));
        writeln!(w, "{},{},{},{},{:.16e},{}", o.m, rep, o.r, o.v, o.fdp, theta)?;
    }
    Ok(())
}

/// Seed for the design at `m` derived from a template seed.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn design_at(template: &DesignTemplate, m: usize) -> Result<DependenceDesign> {
    let mut d = template.design(m)?;
    d.seed = derive_seed(template.seed, m as u64);
    Ok(d)
}

fn check_grid(m_grid: &[usize]) -> Result<()> {
    if m_grid.is_empty() || m_grid.windows(2).any(|w| w[0] >= w[1]) || m_grid[0] == 0 {
        return Err(Error::InvalidDesign("m grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Dispersion of a normalized count across replications at one `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub m: usize,
    pub mean: f64,
    pub std: f64,
    pub max_abs_deviation: f64,
}

impl TraceRow {
    fn new(m: usize, s: &RunningStats) -> Self {
        Self {
            m,
            mean: s.mean(),
            std: s.std(),
            max_abs_deviation: s.max_abs_deviation(),
        }
    }
}

/// Replication dispersion of `m^{−1} R_m(t)` and `m0^{−1} V_m(t)` on a grid of
/// `m`, with log-log slopes of the standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SllnTrace {
    pub m_grid: Vec<usize>,
    pub rejections: Vec<TraceRow>,
    pub false_rejections: Vec<TraceRow>,
    /// `None` when a standard deviation is zero.
    pub rejection_slope: Option<f64>,
    pub false_rejection_slope: Option<f64>,
}

impl SllnTrace {
    /// Standard deviations strictly decrease along the grid for both traces.
    pub fn strictly_decreasing(&self) -> bool {
        let dec = |rows: &[TraceRow]| rows.windows(2).all(|w| w[1].std < w[0].std);
        dec(&self.rejections) && dec(&self.false_rejections)
    }
}

pub fn slln_sweep(
    template: &DesignTemplate,
    m_grid: &[usize],
    t: Probability,
    replications: usize,
) -> Result<SllnTrace> {
    check_grid(m_grid)?;
    if replications < 2 {
        return Err(domain("a sweep needs at least two replications"));
    }
    let spec = SimulationSpec {
        t,
        lambda: Probability::new(DEFAULT_LAMBDA)?,
        replications,
    };
    let (mut rejections, mut false_rejections) = (Vec::new(), Vec::new());
    for &m in m_grid {
        let design = design_at(template, m)?;
        let outcomes = simulate(&design, spec)?;
        let r: RunningStats = outcomes.iter().map(|o| o.r as f64 / m as f64).collect();
        let v: RunningStats = outcomes
            .iter()
            .map(|o| if o.m0 == 0 { 0.0 } else { o.v as f64 / o.m0 as f64 })
            .collect();
        rejections.push(TraceRow::new(m, &r));
        false_rejections.push(TraceRow::new(m, &v));
    }
    let ms: Vec<f64> = m_grid.iter().map(|&m| m as f64).collect();
    let slope = |rows: &[TraceRow]| {
        let s: Vec<f64> = rows.iter().map(|r| r.std).collect();
        log_log_slope(&ms, &s).ok()
    };
    Ok(SllnTrace {
        m_grid: m_grid.to_vec(),
        rejection_slope: if m_grid.len() > 1 { slope(&rejections) } else { None },
        false_rejection_slope: if m_grid.len() > 1 { slope(&false_rejections) } else { None },
        rejections,
        false_rejections,
    })
}

/// Mean and spread of an empirical rejection curve at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub mean: f64,
    pub std: f64,
}

/// Empirical `Ĝ0(t) = mean m0^{−1} V_m(t)` and
/// `Ĝ1(t) = mean (m − m0)^{−1} (R_m − V_m)(t)` at one `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSet {
    pub m: usize,
    /// `None` when there are no nulls.
    pub g0: Option<Vec<CurvePoint>>,
    /// `None` when there are no alternatives.
    pub g1: Option<Vec<CurvePoint>>,
}

pub fn weak_dependence_curves(
    template: &DesignTemplate,
    m_grid: &[usize],
    t_grid: &[f64],
    replications: usize,
) -> Result<Vec<CurveSet>> {
    check_grid(m_grid)?;
    let ts = t_grid
        .iter()
        .map(|&t| Probability::new(t))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let design = design_at(template, m)?;
        let marginal = design.null_marginal();
        let m0 = design.m0();
        let per_rep = (0..replications as u64)
            .into_par_iter()
            .map(|rep| {
                let stats = sample_replication(&design, rep)?;
                let p = null_pvalues(&stats.values, marginal)?;
                ts.iter()
                    .map(|&t| count(&p, &stats.null_mask, t).map(|o| (o.v, o.r - o.v)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let curve = |denominator: usize, pick: fn((usize, usize)) -> usize| -> Option<Vec<CurvePoint>> {
            (denominator > 0).then(|| {
                ts.iter()
                    .enumerate()
                    .map(|(k, t)| {
                        let s: RunningStats = per_rep
                            .iter()
                            .map(|row| pick(row[k]) as f64 / denominator as f64)
                            .collect();
                        CurvePoint {
                            t: t.value(),
                            mean: s.mean(),
                            std: s.std(),
                        }
                    })
                    .collect()
            })
        };
        out.push(CurveSet {
            m,
            g0: curve(m0, |(v, _)| v),
            g1: curve(m - m0, |(_, s)| s),
        });
    }
    Ok(out)
}

/// Accuracy of the plug-in FDP estimate at one `m̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaRow {
    pub m: usize,
    pub median_abs_error: f64,
    pub mean_fdp: f64,
    pub mean_theta: f64,
}

/// Median `|ϑ − FDP|` across replications for each `m̃` in the grid.
pub fn theta_consistency(
    template: &DesignTemplate,
    m_grid: &[usize],
    spec: SimulationSpec,
) -> Result<Vec<ThetaRow>> {
    check_grid(m_grid)?;
    m_grid
        .iter()
        .map(|&m| {
            let outcomes = simulate(&design_at(template, m)?, spec)?;
            let errs: Vec<f64> = outcomes
                .iter()
                .map(|o| (o.theta.expect("simulate sets theta") - o.fdp).abs())
                .collect();
            let n = outcomes.len() as f64;
            Ok(ThetaRow {
                m,
                median_abs_error: median(&errs),
                mean_fdp: outcomes.iter().map(|o| o.fdp).sum::<f64>() / n,
                mean_theta: outcomes.iter().map(|o| o.theta.unwrap_or(0.0)).sum::<f64>() / n,
            })
        })
        .collect()
}
