use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

use lancaster_core::orthopoly::{
    charlier, laguerre, meixner, watson_bound, PolyOrder, PolySequence,
};
use lancaster_core::special::pochhammer;

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn rising(a: &BigRational, k: u32) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, j| acc * (a + q(j as i64, 1)))
}

fn factorial(k: u32) -> BigRational {
    (1..=k).fold(BigRational::one(), |acc, j| acc * q(j as i64, 1))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite")
}

/// `L_n^{(α)}(x) = Σ_k (α+k+1)_{n−k} / (n−k)! · (−x)^k / k!`.
fn laguerre_exact(n: u32, alpha: &BigRational, x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    let mut xk = BigRational::one();
    for k in 0..=n {
        let coef = rising(&(alpha + q(k as i64 + 1, 1)), n - k) / factorial(n - k);
        let term = coef * &xk / factorial(k);
        acc += if k % 2 == 0 { term } else { -term };
        xk *= x;
    }
    acc
}

/// `Σ_k (−n)_k (−x)_k / (k! d_k) z^k`, the terminating hypergeometric sum
/// shared by Charlier (`d_k = 1`, `z = −1/a`) and Meixner
/// (`d_k = (β)_k`, `z = 1 − 1/c`).
fn hyper_exact(n: u32, x: u32, z: &BigRational, beta: Option<&BigRational>) -> BigRational {
    let mut acc = BigRational::zero();
    for k in 0..=n.min(x) {
        let mut term = rising(&q(-(n as i64), 1), k) * rising(&q(-(x as i64), 1), k) / factorial(k);
        if let Some(b) = beta {
            term /= rising(b, k);
        }
        for _ in 0..k {
            term *= z;
        }
        acc += term;
    }
    acc
}

fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn laguerre_matches_exact_sum() {
    for (an, ad) in [(0, 1), (1, 2), (-1, 2), (3, 1)] {
        let alpha = q(an, ad);
        for (xn, xd) in [(1, 4), (1, 1), (5, 2), (10, 1), (30, 1)] {
            let x = q(xn, xd);
            for n in [0, 1, 2, 5, 10, 20, 30] {
                let want = to_f64(&laguerre_exact(n, &alpha, &x));
                let got = laguerre(PolyOrder::new(n).unwrap(), to_f64(&alpha), to_f64(&x))
                    .unwrap()
                    .value;
                let scale: f64 = (0..=n)
                    .map(|k| to_f64(&(rising(&(&alpha + q(k as i64 + 1, 1)), n - k) / factorial(n - k))) * to_f64(&x).powi(k as i32) / to_f64(&factorial(k)))
                    .sum::<f64>();
                assert!(
                    (got - want).abs() <= 1e-12 * scale.max(1.0),
                    "L_{n}^({alpha})({x}): {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn charlier_matches_exact_sum_including_degrees_above_x() {
    for (an, ad) in [(1, 2), (2, 1), (5, 1)] {
        let a = q(an, ad);
        let z = -(BigRational::one() / &a);
        for x in [0u32, 1, 3, 7, 15] {
            for n in [0u32, 1, 2, 5, 10, 20, 40] {
                let exact = to_f64(&hyper_exact(n, x, &z, None));
                let norm = (n as f64 * to_f64(&a).ln() - lgamma(n as f64 + 1.0)).exp().sqrt();
                let want = exact * norm;
                let got = charlier(PolyOrder::new(n).unwrap(), to_f64(&a), x as u64).unwrap().value;
                assert!(rel_close(got, want, 1e-9), "C_{n}({x}; {a}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn meixner_matches_exact_sum_including_degrees_above_x() {
    for ((bn, bd), (cn, cd)) in [((2, 1), (1, 2)), ((1, 2), (3, 10)), ((7, 2), (4, 5))] {
        let beta = q(bn, bd);
        let c = q(cn, cd);
        let z = BigRational::one() - BigRational::one() / &c;
        let (bf, cf) = (to_f64(&beta), to_f64(&c));
        for x in [0u32, 1, 3, 7, 15] {
            for n in [0u32, 1, 2, 5, 10, 20, 40] {
                let exact = to_f64(&hyper_exact(n, x, &z, Some(&beta)));
                let ln_norm = pochhammer_ln(bf, n) + n as f64 * cf.ln() - lgamma(n as f64 + 1.0);
                let want = exact * (0.5 * ln_norm).exp();
                let got = meixner(PolyOrder::new(n).unwrap(), bf, cf, x as u64).unwrap().value;
                assert!(rel_close(got, want, 1e-9), "M_{n}({x}; {beta}, {c}): {got} vs {want}");
            }
        }
    }
}

fn lgamma(x: f64) -> f64 {
    lancaster_core::special::log_gamma(x).unwrap()
}

fn pochhammer_ln(a: f64, n: u32) -> f64 {
    lgamma(a + n as f64) - lgamma(a)
}

#[test]
fn gamma_orthonormal_is_scaled_laguerre() {
    let (shape, x) = (0.7, 2.3);
    let seq: Vec<f64> = PolySequence::gamma_orthonormal(shape, x)
        .unwrap()
        .take(12)
        .map(|v| v.to_f64())
        .collect();
    for (n, v) in seq.iter().enumerate() {
        let l = laguerre(PolyOrder::new(n as u32).unwrap(), shape - 1.0, x).unwrap().value;
        let norm = (lgamma(n as f64 + 1.0) - pochhammer_ln(shape, n as u32)).exp().sqrt();
        assert!(rel_close(*v, l * norm, 1e-12));
    }
}

#[test]
fn high_degree_values_carry_a_log_form() {
    let v = meixner(PolyOrder::new(600).unwrap(), 2.0, 0.5, 3).unwrap();
    let log = v.log.expect("degree above the log-scale threshold");
    assert_eq!(log.sign as f64, v.value.signum());
    assert!(rel_close(log.ln_abs, v.value.abs().ln(), 1e-12));
}

#[test]
fn degree_limits_and_domains() {
    assert!(PolyOrder::new(10_001).is_err());
    assert!(laguerre(PolyOrder::new(3).unwrap(), -1.0, 1.0).is_err());
    assert!(laguerre(PolyOrder::new(3).unwrap(), 0.5, -1.0).is_err());
    assert!(charlier(PolyOrder::new(3).unwrap(), 0.0, 1).is_err());
    assert!(meixner(PolyOrder::new(3).unwrap(), 1.0, 1.0, 1).is_err());
}

proptest! {
    #[test]
    fn watson_bound_holds(n in 0u32..60, alpha in 0.0f64..5.0, x in 0.0f64..60.0) {
        let order = PolyOrder::new(n).unwrap();
        let v = laguerre(order, alpha, x).unwrap().value.abs();
        let b = watson_bound(order, alpha, x).unwrap();
        prop_assert!(v <= b * (1.0 + 1e-10), "|L| = {v} > bound {b}");
    }

    #[test]
    fn pochhammer_recurrence(a in 0.01f64..20.0, n in 0u64..40) {
        let lhs = pochhammer(a, n + 1);
        let rhs = pochhammer(a, n) * (a + n as f64);
        prop_assert!(rel_close(lhs, rhs, 1e-12));
    }

    #[test]
    fn charlier_is_self_dual(a in 0.1f64..8.0, n in 0u32..30, x in 0u32..30) {
        let lhs = charlier(PolyOrder::new(n).unwrap(), a, x as u64).unwrap().value;
        let rhs = charlier(PolyOrder::new(x).unwrap(), a, n as u64).unwrap().value;
        // orthonormal values differ from the symmetric C_n(x) by √(a^n / n!)
        let ratio = ((n as f64 - x as f64) * a.ln() - lgamma(n as f64 + 1.0) + lgamma(x as f64 + 1.0)).exp().sqrt();
        prop_assert!((lhs - rhs * ratio).abs() <= 1e-9 * lhs.abs().max(1e-300));
    }
}
