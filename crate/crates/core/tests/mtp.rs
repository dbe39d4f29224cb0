use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use lancaster_core::design::{AltSpec, BlockRule, DesignTemplate, NullLayout};
use lancaster_core::lancaster::{Coordinate, FamilyParams};
use lancaster_core::mtp::{
    count, null_pvalues, simulate, slln_sweep, storey_pi0, weak_dependence_curves, write_csv,
    SimulationSpec,
};
use lancaster_core::sampler::{replication_rng, sample_replication};
use lancaster_core::special::{GammaParams, PoissonParams, Probability};
use lancaster_core::stats::RunningStats;
use lancaster_core::validation::simulation_csv;

fn p(t: f64) -> Probability {
    Probability::new(t).unwrap()
}

fn gamma_template(block: BlockRule, rho: f64, pi0: f64) -> DesignTemplate {
    DesignTemplate {
        block,
        rho,
        family: FamilyParams::Gamma(GammaParams::new(1.0).unwrap()),
        pi0,
        alt: (pi0 < 1.0).then_some(AltSpec::ScaleFactor(4.0)),
        null_layout: NullLayout::Random,
        seed: 21,
    }
}

proptest! {
    #[test]
    fn count_matches_naive_loop_and_is_permutation_invariant(
        data in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 0..200),
        t in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let (pv, mask): (Vec<f64>, Vec<bool>) = data.iter().copied().unzip();
        let o = count(&pv, &mask, p(t)).unwrap();
        let mut r = 0;
        let mut v = 0;
        for i in 0..pv.len() {
            if pv[i] <= t {
                r += 1;
                if mask[i] {
                    v += 1;
                }
            }
        }
        prop_assert_eq!((o.r, o.v), (r, v));
        prop_assert!(o.v <= o.r && o.r <= o.m && o.v <= o.m0);
        prop_assert!((0.0..=1.0).contains(&o.fdp));
        if o.r == 0 {
            prop_assert_eq!(o.fdp, 0.0);
        }
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut replication_rng(seed, 0));
        let (pv2, mask2): (Vec<f64>, Vec<bool>) = shuffled.into_iter().unzip();
        let o2 = count(&pv2, &mask2, p(t)).unwrap();
        prop_assert_eq!((o.r, o.v, o.m0), (o2.r, o2.v, o2.m0));
    }

    #[test]
    fn storey_stays_in_range(pv in prop::collection::vec(0.0f64..=1.0, 1..100), lambda in 0.01f64..0.99) {
        let pi0 = storey_pi0(&pv, p(lambda)).unwrap();
        prop_assert!(pi0 > 0.0 && pi0 <= 1.0);
    }
}

#[test]
fn storey_is_calibrated_for_uniform_pvalues() {
    let mut rng = replication_rng(5, 0);
    let pv: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let pi0 = storey_pi0(&pv, p(0.5)).unwrap();
    assert!((pi0 - 1.0).abs() <= 0.01);
    assert!(storey_pi0(&pv, p(1.0)).is_err());
}

#[test]
fn discrete_null_false_rejections_are_unbiased() {
    let fam = FamilyParams::Poisson(PoissonParams::new(2.0).unwrap());
    let d = DesignTemplate {
        block: BlockRule::Fixed(5),
        rho: 0.5,
        family: fam,
        pi0: 0.6,
        alt: Some(AltSpec::MeanShift(3.0)),
        null_layout: NullLayout::Random,
        seed: 4,
    }
    .design(500)
    .unwrap();
    let t = p(0.05);
    let law = fam.marginal(Coordinate::First);
    let target = law.rejection_probability(t).unwrap();
    let s: RunningStats = (0..2_000)
        .map(|rep| {
            let v = sample_replication(&d, rep).unwrap();
            let pv = null_pvalues(&v.values, law).unwrap();
            let o = count(&pv, &v.null_mask, t).unwrap();
            o.v as f64 / o.m0 as f64
        })
        .collect();
    assert!((s.mean() - target).abs() < 4.0 * s.std_error(), "{} vs {target}", s.mean());
    // the discrete null is not uniform: P(p ≤ t) = 1 − F(x0) differs from t
    assert!((target - 0.05).abs() > 5.0 * s.std_error());
}

#[test]
fn iid_sweep_has_clt_slope() {
    let trace = slln_sweep(&gamma_template(BlockRule::Fixed(1), 0.0, 0.8), &[500, 5_000, 50_000], p(0.05), 200).unwrap();
    let rs = trace.rejection_slope.unwrap();
    let vs = trace.false_rejection_slope.unwrap();
    assert!((rs + 0.5).abs() <= 0.05, "{rs}");
    assert!((vs + 0.5).abs() <= 0.05, "{vs}");
    assert!(trace.strictly_decreasing());
    assert!(trace.rejections.iter().all(|r| r.std >= 0.0 && r.max_abs_deviation >= r.std));
}

#[test]
fn sweep_rejects_bad_grids() {
    let tpl = gamma_template(BlockRule::Sqrt, 0.5, 1.0);
    assert!(slln_sweep(&tpl, &[100, 100], p(0.05), 10).is_err());
    assert!(slln_sweep(&tpl, &[], p(0.05), 10).is_err());
    assert!(slln_sweep(&tpl, &[100, 50], p(0.05), 10).is_err());
}

#[test]
fn all_null_curve_tracks_null_rejection_probability() {
    let tpl = gamma_template(BlockRule::Fixed(10), 0.4, 1.0);
    let ts = [0.0, 0.01, 0.05, 0.2];
    let curves = weak_dependence_curves(&tpl, &[2_000], &ts, 300).unwrap();
    let set = &curves[0];
    assert!(set.g1.is_none());
    let g0 = set.g0.as_ref().unwrap();
    assert_eq!(g0[0].mean, 0.0);
    for pt in &g0[1..] {
        let se = pt.std / 300f64.sqrt();
        assert!((pt.mean - pt.t).abs() < 4.0 * se, "t={}: {}", pt.t, pt.mean);
    }
}

#[test]
fn curve_bands_shrink_under_sqrt_blocks() {
    let tpl = gamma_template(BlockRule::Sqrt, 0.5, 0.8);
    let curves = weak_dependence_curves(&tpl, &[1_000, 10_000, 100_000], &[0.0, 0.05], 100).unwrap();
    for w in curves.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(b.g0.as_ref().unwrap()[1].std < a.g0.as_ref().unwrap()[1].std);
        assert!(b.g1.as_ref().unwrap()[1].std < a.g1.as_ref().unwrap()[1].std);
        assert_eq!(b.g1.as_ref().unwrap()[0].mean, 0.0);
    }
}

#[test]
fn csv_layout_and_thread_independence() {
    let d = gamma_template(BlockRule::Fixed(10), 0.4, 0.8).design(1_000).unwrap();
    let spec = SimulationSpec {
        t: p(0.05),
        lambda: p(0.5),
        replications: 20,
    };
    let outcomes = simulate(&d, spec).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &outcomes).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,replication,R,V,fdp,theta"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1000");
    assert_eq!(row[1], "0");
    let digits = row[4].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(digits.len(), 17);
    assert_eq!(buf, simulation_csv(&d, spec, true).unwrap());
}
