use lancaster_core::covariance::variance_bound_design;
use lancaster_core::design::{l1_norm, l1_norm_matrix, AltSpec, DependenceDesign, NullLayout};
use lancaster_core::lancaster::{Coordinate, FamilyParams, GammaNBParams, LancasterPair, Marginal, Truncation};
use lancaster_core::mtp::{count, null_pvalues};
use lancaster_core::sampler::{
    replication_rng, sample_pair_gamma, sample_pair_nb, sample_pair_nb_shared_gamma, sample_replication,
    sample_vector, GridSampler, SamplerPath,
};
use lancaster_core::special::{ChiSquare, GammaParams, NBParams, PoissonParams, Probability};
use lancaster_core::stats::RunningStats;
use lancaster_core::Error;

fn gamma(alpha: f64) -> FamilyParams {
    FamilyParams::Gamma(GammaParams::new(alpha).unwrap())
}

fn poisson(a: f64) -> FamilyParams {
    FamilyParams::Poisson(PoissonParams::new(a).unwrap())
}

fn neg_binomial(beta: f64, c: f64) -> FamilyParams {
    FamilyParams::NegBinomial(NBParams::new(beta, c).unwrap())
}

fn design(m: usize, b: usize, rho: f64, family: FamilyParams) -> DependenceDesign {
    DependenceDesign {
        m,
        block_size: b,
        rho,
        family,
        pi0: 1.0,
        alt: None,
        null_layout: NullLayout::Leading,
        seed: 17,
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Kolmogorov–Smirnov statistic `√n · sup |F_n − F|`.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    d * n.sqrt()
}

/// Chi-square goodness of fit with cells `0..k` and a pooled upper tail,
/// `k` chosen so that every expected count is at least 5.
fn chi_square_passes(xs: &[f64], law: Marginal) -> bool {
    let n = xs.len() as f64;
    let mut k = 0;
    while n * law.sf(k as f64) >= 5.0 && n * law.density(k as f64 + 1.0).unwrap() >= 5.0 {
        k += 1;
    }
    let mut observed = vec![0.0; k + 2];
    for &x in xs {
        observed[(x as usize).min(k + 1)] += 1.0;
    }
    let mut stat = 0.0;
    for (j, &o) in observed.iter().enumerate() {
        let p = if j <= k { law.density(j as f64).unwrap() } else { law.sf(k as f64) };
        stat += (o - n * p).powi(2) / (n * p);
    }
    let crit = ChiSquare::new((k + 1) as f64)
        .unwrap()
        .upper_threshold(Probability::new(0.01).unwrap())
        .unwrap();
    stat < crit
}

#[test]
fn kibble_pearson_correlation() {
    let mut rng = replication_rng(1, 0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..1_000_000).map(|_| sample_pair_gamma(&mut rng, 1.0, 0.5).unwrap()).unzip();
    assert!((pearson(&xs, &ys) - 0.5).abs() < 3e-3);
}

#[test]
fn shared_gamma_pearson_correlation_at_full_sharing() {
    let mut rng = replication_rng(2, 0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..1_000_000)
        .map(|_| {
            let (x, y) = sample_pair_nb_shared_gamma(&mut rng, 2.0, 0.5, 0.5).unwrap();
            (x as f64, y as f64)
        })
        .unzip();
    assert!((pearson(&xs, &ys) - 0.5).abs() < 3e-3);
}

/// `E[φ_2(X) φ_2(Y)]` with its standard error.
fn second_canonical<F: FnMut() -> (u64, u64)>(law: Marginal, n: usize, mut draw: F) -> (f64, f64) {
    let s: RunningStats = (0..n)
        .map(|_| {
            let (x, y) = draw();
            let px = law.orthonormal(x as f64).unwrap().nth(2).unwrap().to_f64();
            let py = law.orthonormal(y as f64).unwrap().nth(2).unwrap().to_f64();
            px * py
        })
        .collect();
    (s.mean(), s.std_error())
}

#[test]
fn shared_gamma_mixing_is_not_the_meixner_kernel() {
    let (beta, c, rho) = (1.0, 0.8, 0.4);
    let law = neg_binomial(beta, c).marginal(Coordinate::First);
    let mut rng = replication_rng(3, 0);
    let (shared, se) = second_canonical(law, 2_000_000, || sample_pair_nb_shared_gamma(&mut rng, beta, c, rho).unwrap());
    // shared mixing gives c² (βr)_2 / (β)_2 with r = ρ/c
    let r = rho / c;
    let mixing = c * c * (beta * r) * (beta * r + 1.0) / (beta * (beta + 1.0));
    assert!((shared - mixing).abs() < 4.0 * se, "{shared} vs {mixing} ± {se}");
    assert!((shared - rho * rho).abs() > 6.0 * se, "{shared} vs ρ² = {} ± {se}", rho * rho);
    assert!(!SamplerPath::SharedGamma.enabled());

    let mut rng = replication_rng(4, 0);
    let (bdi, se) = second_canonical(law, 2_000_000, || sample_pair_nb(&mut rng, beta, c, rho).unwrap());
    assert!((bdi - rho * rho).abs() < 4.0 * se, "{bdi} vs ρ² ± {se}");
}

#[test]
fn null_coordinates_keep_the_marginal() {
    let n = 100_000;
    for fam in [gamma(0.5), poisson(2.0), neg_binomial(2.0, 0.5)] {
        let mut d = design(10, 5, 0.6, fam);
        d.pi0 = 0.5;
        d.alt = Some(match fam {
            FamilyParams::Gamma(_) => AltSpec::ScaleFactor(3.0),
            _ => AltSpec::MeanShift(2.0),
        });
        let law = fam.marginal(Coordinate::First);
        let xs: Vec<f64> = (0..n as u64)
            .map(|rep| {
                let v = sample_replication(&d, rep).unwrap();
                let i = v.null_mask.iter().position(|&b| b).unwrap();
                v.values[i]
            })
            .collect();
        if law.is_discrete() {
            assert!(chi_square_passes(&xs, law), "{}", fam.name());
        } else {
            assert!(ks_statistic(xs, |x| law.cdf(x)) < 1.628, "{}", fam.name());
        }
    }
}

#[test]
fn block_correlations() {
    let d = design(6, 3, 0.5, gamma(1.0));
    let vs: Vec<Vec<f64>> = (0..100_000).map(|rep| sample_replication(&d, rep).unwrap().values).collect();
    let col = |i: usize| vs.iter().map(|v| v[i]).collect::<Vec<_>>();
    assert!((pearson(&col(0), &col(1)) - 0.5).abs() < 0.015);
    assert!((pearson(&col(3), &col(5)) - 0.5).abs() < 0.015);
    assert!(pearson(&col(0), &col(4)).abs() < 0.015);
}

#[test]
fn single_blocks_are_independent() {
    let d = design(4, 1, 0.9, poisson(3.0));
    let vs: Vec<Vec<f64>> = (0..50_000).map(|rep| sample_replication(&d, rep).unwrap().values).collect();
    let col = |i: usize| vs.iter().map(|v| v[i]).collect::<Vec<_>>();
    assert!(pearson(&col(0), &col(1)).abs() < 0.02);
}

#[test]
fn replication_streams_are_reproducible() {
    let mut d = design(300, 7, 0.3, neg_binomial(2.0, 0.4));
    d.pi0 = 0.7;
    d.alt = Some(AltSpec::MeanShift(1.5));
    d.null_layout = NullLayout::Random;
    let a = sample_replication(&d, 5).unwrap();
    let b = sample_replication(&d, 5).unwrap();
    let c = sample_replication(&d, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.null_mask.iter().filter(|&&x| x).count(), 210);
}

#[test]
fn design_norm_matches_explicit_matrix() {
    for (m, b, rho) in [(6, 3, 0.5), (10, 4, 0.3), (7, 7, 0.9), (5, 1, 0.2)] {
        let d = design(m, b, rho, gamma(1.0));
        let explicit = l1_norm_matrix(&d.explicit_matrix().unwrap());
        assert!((l1_norm(&d) - explicit).abs() < 1e-12);
    }
    assert_eq!(l1_norm(&design(6, 3, 0.5, gamma(1.0))), 12.0);
    let big = design(10_000, 100, 0.5, gamma(1.0));
    assert!((l1_norm(&big) / 1e8 - 5.05e-3).abs() < 1e-15);
}

#[test]
fn gamma_nb_table_clipping() {
    let pair = LancasterPair::new(FamilyParams::GammaNb(GammaNBParams::new(1.0, 2.0, 0.25).unwrap()), 0.4).unwrap();
    let err = GridSampler::new(&pair, Truncation::default()).unwrap_err();
    assert!(matches!(err, Error::ExcessiveClipping { .. }));
    let grid = GridSampler::with_clip_limit(&pair, Truncation::default(), 1e-4).unwrap();
    assert!(grid.clipped > 1e-6 && grid.clipped < 1e-4);
    assert!((grid.renormalization() - 1.0).abs() < 1e-4);
}

#[test]
fn grid_at_independence_reproduces_marginals() {
    let pair = LancasterPair::new(neg_binomial(2.0, 0.5), 0.0).unwrap();
    let grid = GridSampler::new(&pair, Truncation::default()).unwrap();
    assert_eq!(grid.clipped, 0.0);
    let mut rng = replication_rng(9, 0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..100_000).map(|_| grid.sample(&mut rng)).unzip();
    let law = neg_binomial(2.0, 0.5).marginal(Coordinate::First);
    assert!(chi_square_passes(&xs, law));
    assert!(chi_square_passes(&ys, law));
}

#[test]
fn gamma_nb_grid_gamma_coordinate_follows_marginal() {
    let pair = LancasterPair::new(FamilyParams::GammaNb(GammaNBParams::new(1.5, 2.0, 0.25).unwrap()), 0.2).unwrap();
    let grid = GridSampler::with_clip_limit(&pair, Truncation::default(), 1e-4).unwrap();
    let mut rng = replication_rng(10, 0);
    let ys: Vec<f64> = (0..100_000).map(|_| grid.sample(&mut rng).1).collect();
    let law = pair.marginal(Coordinate::Second);
    assert!(ks_statistic(ys, |y| law.cdf(y)) < 1.628);
}

/// With every within-block pair at the same `ρ`, `C ρ = κ(ρ)` and the
/// majorant equals the exact variance of `m^{−1} R_m` under the null.
#[test]
fn variance_bound_is_attained_by_uniform_null_blocks() {
    let t = Probability::new(0.05).unwrap();
    let reps = 4_000;
    for (fam, rho) in [(gamma(1.0), 0.5), (poisson(2.0), 0.6), (neg_binomial(2.0, 0.5), 0.4)] {
        let d = design(200, 20, rho, fam);
        let bound = variance_bound_design(&d, t, Truncation::default()).unwrap().value;
        let law = d.null_marginal();
        let s: RunningStats = (0..reps)
            .map(|rep| {
                let v = sample_replication(&d, rep).unwrap();
                let p = null_pvalues(&v.values, law).unwrap();
                count(&p, &v.null_mask, t).unwrap().r as f64 / d.m as f64
            })
            .collect();
        let se = bound * (2.0 / (reps as f64 - 1.0)).sqrt();
        assert!((s.variance() - bound).abs() < 4.0 * se, "{}: {} vs {bound}", fam.name(), s.variance());
    }
}

#[test]
fn sample_vector_rejects_pairwise_only_family() {
    let d = design(4, 2, 0.3, FamilyParams::GammaNb(GammaNBParams::new(1.0, 2.0, 0.25).unwrap()));
    assert!(sample_vector(&d, &mut replication_rng(0, 0)).is_err());
}
