use proptest::prelude::*;
use vlx_core::specfun::{fractional_integral, gamma, ml, mittag_leffler, GridFn, MlParams};

const ML_TABLE: &str = include_str!("oracle/ml_values.txt");

#[test]
fn ml_matches_high_precision_series() {
    let mut worst = 0.0f64;
    for line in ML_TABLE.lines().filter(|l| !l.trim().is_empty()) {
        let c: Vec<f64> = line.split_whitespace().map(|s| s.parse().unwrap()).collect();
        let (a, b, z, want) = (c[0], c[1], c[2], c[3]);
        let got = ml(a, b, z).unwrap();
        let rel = ((got - want) / want).abs();
        worst = worst.max(rel);
        assert!(rel <= 1e-10, "E_{{{a},{b}}}({z}) = {got}, oracle {want}, rel {rel:e}");
    }
    eprintln!("worst relative ML error {worst:e}");
}

#[test]
fn ml_trivial_values() {
    assert!((ml(1.0, 1.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
    assert!((ml(0.7, 0.7, 0.0).unwrap() - 1.0 / gamma(0.7)).abs() < 1e-15);
    let erfc1 = 0.157_299_207_050_285_13;
    let v = ml(0.5, 1.0, -1.0).unwrap();
    assert!((v - std::f64::consts::E * erfc1).abs() < 1e-14, "{v}");
}

#[test]
fn ml_at_zero_is_reciprocal_gamma() {
    for &a in &[0.1, 0.5, 0.7, 1.0] {
        for &b in &[0.3, 0.7, 1.0, 1.7, 2.5] {
            let v = ml(a, b, 0.0).unwrap();
            assert!((v - 1.0 / gamma(b)).abs() <= 1e-12 * v.abs());
        }
    }
}

#[test]
fn ml_alpha_alpha_increasing_on_negative_axis() {
    for &a in &[0.6, 0.7, 0.9] {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=500 {
            let z = -50.0 + 0.1 * i as f64;
            let v = ml(a, a, z).unwrap();
            assert!(v > 0.0 && v > prev, "alpha {a} z {z}: {v} <= {prev}");
            prev = v;
        }
    }
}

#[test]
fn ml_rejects_bad_parameters() {
    assert!(MlParams::new(0.0, 1.0).is_err());
    assert!(MlParams::new(1.2, 1.0).is_err());
    assert!(MlParams::new(0.5, -1.0).is_err());
    assert!(mittag_leffler(MlParams::new(0.5, 1.0).unwrap(), f64::NAN).is_err());
}

#[test]
fn integral_of_one_is_t() {
    let f = GridFn::sample(0.01, 100, |_| 1.0);
    let g = fractional_integral(1.0, &f).unwrap();
    for (k, v) in g.values.iter().enumerate() {
        assert!((v - k as f64 * 0.01).abs() < 1e-14);
    }
}

#[test]
fn fractional_integral_of_one_is_exact() {
    for &a in &[0.05, 0.3, 0.7] {
        let f = GridFn::sample(1e-3, 1000, |_| 1.0);
        let g = fractional_integral(a, &f).unwrap();
        for k in [1usize, 10, 500, 1000] {
            let t = k as f64 * 1e-3;
            let want = t.powf(a) / gamma(a + 1.0);
            assert!((g.values[k] - want).abs() <= 1e-12 * want, "a {a} k {k}");
        }
    }
}

#[test]
fn semigroup_on_linear_function() {
    // I^0.3 of t is exact for the piecewise-linear rule; the outer I^0.7 sees
    // an interpolation error of order dt^2.
    let n = 10_000;
    let f = GridFn::sample(1.0 / n as f64, n, |t| t);
    let a = fractional_integral(0.3, &f).unwrap();
    let b = fractional_integral(0.7, &a).unwrap();
    let c = fractional_integral(1.0, &f).unwrap();
    let gap = b.values.iter().zip(&c.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-8, "gap {gap:e}");
}

fn semigroup_sup_error(f: impl Fn(f64) -> f64, exact: impl Fn(f64, f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 1000;
    let g = GridFn::sample(1e-3, n, f);
    let ab = fractional_integral(a, &fractional_integral(b, &g).unwrap()).unwrap();
    let sup = (0..=n).map(|k| exact(a + b, k as f64 * 1e-3).abs()).fold(0.0, f64::max);
    (0..=n).map(|k| (ab.values[k] - exact(a + b, k as f64 * 1e-3)).abs() / sup).fold(0.0, f64::max)
}

// I^s of t^m is Gamma(m+1) t^(m+s) / Gamma(m+s+1)
fn ipow(m: f64, s: f64, t: f64) -> f64 {
    gamma(m + 1.0) / gamma(m + s + 1.0) * t.powf(m + s)
}

#[test]
fn semigroup_relative_error_at_dt_1e3() {
    for &(a, b) in &[(0.3, 0.4), (0.5, 0.5), (0.2, 0.7)] {
        let e2 = semigroup_sup_error(|t| t * t, |s, t| ipow(2.0, s, t), a, b);
        let e1 = semigroup_sup_error(|t| t, |s, t| ipow(1.0, s, t), a, b);
        assert!(e1 <= 1e-6 && e2 <= 1e-6, "({a},{b}): t {e1:e}, t^2 {e2:e}");
        // the rule is second order; the cubic sits just above 1e-6
        let e3 = semigroup_sup_error(|t| t * t * t, |s, t| ipow(3.0, s, t), a, b);
        assert!(e3 <= 3e-6, "({a},{b}): t^3 {e3:e}");
    }
}

#[test]
fn semigroup_with_constant_term_has_startup_error() {
    // with f(0) != 0 the inner integral behaves like t^b and linear
    // interpolation of it costs O(dt^(a+b)) near the origin
    for &(a, b) in &[(0.3, 0.4), (0.5, 0.5), (0.2, 0.7)] {
        let err = semigroup_sup_error(|t| 1.0 + t, |s, t| ipow(0.0, s, t) + ipow(1.0, s, t), a, b);
        assert!(err <= 2e-3, "({a},{b}): {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fractional_integral_is_linear(
        a in 0.05f64..1.0,
        ca in -3.0f64..3.0,
        cb in -3.0f64..3.0,
        xs in prop::collection::vec(-5.0f64..5.0, 41),
        ys in prop::collection::vec(-5.0f64..5.0, 41),
    ) {
        let f = GridFn::new(0.025, xs.clone()).unwrap();
        let g = GridFn::new(0.025, ys.clone()).unwrap();
        let h = GridFn::new(0.025, xs.iter().zip(&ys).map(|(x, y)| ca * x + cb * y).collect()).unwrap();
        let (fi, gi, hi) = (
            fractional_integral(a, &f).unwrap(),
            fractional_integral(a, &g).unwrap(),
            fractional_integral(a, &h).unwrap(),
        );
        for k in 0..=40 {
            let lin = ca * fi.values[k] + cb * gi.values[k];
            prop_assert!((hi.values[k] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn ml_recurrence_holds(a in 0.55f64..1.0, b in 0.2f64..2.0, z in -40.0f64..1.0) {
        // E_{a,b}(z) = 1/Gamma(b) + z E_{a,a+b}(z)
        let lhs = ml(a, b, z).unwrap();
        let rhs = 1.0 / gamma(b) + z * ml(a, a + b, z).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (lhs.abs() + 1e-3), "{} vs {}", lhs, rhs);
    }
}

#[test]
fn ml_near_alpha_one_is_continuous_across_regimes() {
    // series on the right of -1, contour integral on the left
    for &a in &[0.76, 0.9, 0.99, 0.9993, 0.999_999_9] {
        for &b in &[a, 1.0, a + 1.0, 0.01] {
            let left = ml(a, b, -1.0 - 1e-9).unwrap();
            let right = ml(a, b, -1.0).unwrap();
            assert!((left - right).abs() < 1e-8 * right.abs().max(1e-3), "a={a} b={b}: {left} {right}");
        }
    }
}

#[test]
fn ml_near_alpha_one_has_power_tail() {
    // E_{a,1}(z) ~ -sum_k z^{-k} / Gamma(1 - k a)
    let a = 0.9993;
    let z: f64 = -400.0;
    let approx: f64 = -(1..=3).map(|k| z.powi(-k) / gamma(1.0 - k as f64 * a)).sum::<f64>();
    let got = ml(a, 1.0, z).unwrap();
    assert!(((got - approx) / approx).abs() < 1e-6, "{got} {approx}");
}
