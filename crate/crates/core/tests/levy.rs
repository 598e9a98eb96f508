use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlx_core::levy::*;
use vlx_core::quad;
use vlx_core::specfun::gamma;

fn fig1_measure() -> LevyMeasureSpec {
    LevyMeasureSpec::cgmy(1.0, 3.0, 1.5).unwrap()
}

fn fig1_triple() -> LevyTriple {
    LevyTriple::model(1.0, 0.4, fig1_measure()).unwrap()
}

/// (e^z - 1 - z)/z^2 with a Taylor branch near 0.
fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 6.0 + z * z / 24.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// int_0^inf g(x) C e^{-Mx} x^{-1-Y} dx for C, M, Y = 1, 3, 1.5, with the
/// integrand supplied as g2(x) = g(x)/x^2.
fn cgmy_integral<G: Fn(f64) -> f64>(g2: G) -> f64 {
    let (c, m, y) = (1.0, 3.0, 1.5);
    // g(x) nu(x) = g2(x) C e^{-Mx} x^{1-Y}, and x^{1-Y} = x^{-1/2}
    let head = quad::integrate_left_singular(|x: f64| g2(x) * c * (-m * x).exp(), 0.0, 1.0, 2.0 - y, 1e-16, 1e-13)
        .unwrap();
    let tail = quad::integrate_to_inf(|x: f64| g2(x) * c * (-m * x).exp() * x.powf(1.0 - y), 1.0, 1e-16, 1e-13).unwrap();
    head + tail
}

#[test]
fn cgmy_validation() {
    assert!(LevyMeasureSpec::cgmy(1.0, 3.0, 1.0).is_err());
    assert!(LevyMeasureSpec::cgmy(1.0, 3.0, 2.0).is_err());
    assert!(LevyMeasureSpec::cgmy(0.0, 3.0, 0.5).is_err());
    assert!(LevyMeasureSpec::cgmy(1.0, -3.0, 0.5).is_err());
    assert!(v1(&fig1_measure(), 3.0).is_err());
    assert!(v1(&fig1_measure(), 2.5).is_ok());
}

#[test]
fn v1_vanishes_at_zero() {
    for m in [LevyMeasureSpec::None, fig1_measure(), LevyMeasureSpec::cgmy(2.0, 1.0, 0.5).unwrap()] {
        assert_eq!(v1(&m, 0.0).unwrap(), 0.0);
    }
}

#[test]
fn v1_closed_form_matches_quadrature() {
    let m = fig1_measure();
    let closed = v1(&m, -1.0).unwrap();
    let oracle = cgmy_integral(|x| phi2(-x));
    assert!(((closed - oracle) / oracle).abs() < 1e-10, "{closed} {oracle}");
    let q = v1_quadrature(&m, -1.0).unwrap();
    assert!(((closed - q) / q).abs() < 1e-8);
}

#[test]
fn v1_second_derivative_at_zero() {
    for (c, m, y) in [(1.0, 3.0, 1.5), (0.7, 2.0, 0.4)] {
        let cg = Cgmy::new(c, m, y).unwrap();
        let spec = LevyMeasureSpec::Cgmy(cg);
        let target = c * gamma(2.0 - y) * m.powf(y - 2.0);
        assert!((cg.second_moment() - target).abs() < 1e-14 * target);
        let h = 1e-3;
        let fd = (v1(&spec, h).unwrap() - 2.0 * v1(&spec, 0.0).unwrap() + v1(&spec, -h).unwrap()) / (h * h);
        assert!(((fd - target) / target).abs() < 1e-5, "{fd} {target}");
        let d = (v1_prime(&spec, h).unwrap() - v1_prime(&spec, -h).unwrap()) / (2.0 * h);
        assert!(((d - target) / target).abs() < 1e-5);
    }
}

#[test]
fn gbar_values() {
    assert_eq!(gbar(0.4, &fig1_measure(), 0.0).unwrap(), 0.0);
    assert!((gbar(2.0, &LevyMeasureSpec::None, -1.0).unwrap() - 2.0).abs() < 1e-15);
    let g = gbar(0.4, &fig1_measure(), -2.0).unwrap();
    let oracle = 0.5 * 0.16 * 4.0 + cgmy_integral(|x| 4.0 * phi2(-2.0 * x));
    assert!((g - oracle).abs() < 1e-10 * oracle);
    assert!(gbar(0.4, &fig1_measure(), 0.1).is_err());
}

#[test]
fn h_functions() {
    let m = fig1_measure();
    assert_eq!(h_fn(&m, 0.5).unwrap(), 0.0);
    let diag = h_tilde(&m, -1.0, -1.0).unwrap();
    let oracle = cgmy_integral(|x: f64| (-x).exp_m1() / x);
    assert!((diag - oracle).abs() < 1e-10 * oracle.abs(), "{diag} {oracle}");
    // approach the diagonal along a sequence with w1 != w2
    let gap = (h_tilde(&m, -1.0 + 5e-5, -1.0 - 5e-5).unwrap() - diag).abs();
    assert!(gap <= 1e-6, "gap {gap}");
    let mut prev = f64::INFINITY;
    for k in 1..6 {
        let d = 10f64.powi(-k);
        let g = (h_tilde(&m, -1.0 + d, -1.0 - d).unwrap() - diag).abs();
        assert!(g <= prev);
        prev = g;
    }
}

#[test]
fn v1_convex_and_gbar_decreasing() {
    let m = fig1_measure();
    let h = 1e-2;
    let mut prev = f64::INFINITY;
    for i in 0..=500 {
        let w = -5.0 + i as f64 * 0.01;
        if w - h >= -5.0 && w + h <= 0.0 {
            let fd = v1(&m, w + h).unwrap() - 2.0 * v1(&m, w).unwrap() + v1(&m, w - h).unwrap();
            assert!(fd >= 0.0);
        }
        let g = gbar(0.4, &m, w.min(0.0)).unwrap();
        assert!(g >= 0.0 && g <= prev);
        prev = g;
        assert!(h_fn(&m, w).unwrap() <= 0.0);
    }
}

#[test]
fn brownian_lambda_inverse() {
    let (l, s) = (1.3, 0.7);
    let t = LevyTriple::model(l, s, LevyMeasureSpec::None).unwrap();
    assert_eq!(lambda_inverse(&t, 0.0).unwrap(), 0.0);
    for &q in &[0.01, 0.5, 3.0, 100.0] {
        let exact = (l - (l * l + 2.0 * s * s * q).sqrt()) / (s * s);
        let u = lambda_inverse(&t, q).unwrap();
        assert!((u - exact).abs() < 1e-12 * (1.0 + exact.abs()));
        assert!((big_lambda(&t, u).unwrap() - q).abs() <= 1e-12 * (1.0 + q));
    }
}

#[test]
fn cgmy_lambda_round_trip() {
    let t = fig1_triple();
    for &q in &[0.1, 1.0, 10.0] {
        let u = lambda_inverse(&t, q).unwrap();
        assert!(u < 0.0);
        assert!((big_lambda(&t, u).unwrap() - q).abs() <= 1e-10);
    }
    let mut q = 1e-4;
    while q < 1e4 {
        let u = lambda_inverse(&t, q).unwrap();
        assert!((big_lambda(&t, u).unwrap() - q).abs() <= 1e-10 * (1.0 + q));
        q *= 1.7;
    }
}

#[test]
fn psi0_examples() {
    let m = fig1_measure();
    assert_eq!(psi0_solve(0.0, 1.0, 0.4, &m).unwrap(), 0.0);
    assert!((psi0_solve(-0.8, 2.0, 0.0, &LevyMeasureSpec::None).unwrap() + 0.4).abs() < 1e-15);
    let a = psi0_solve(-1.0, 1.0, 0.4, &m).unwrap();
    let b = lambda_inverse(&fig1_triple(), 1.0).unwrap();
    assert!((a - b).abs() <= 1e-10, "{a} {b}");
    assert!(psi0_solve(0.5, 1.0, 0.4, &m).is_err());
}

#[test]
fn psi0_equals_lambda_inverse_on_random_forcings() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = fig1_triple();
    for _ in 0..20 {
        let f = -rng.random_range(0.0..5.0f64);
        let a = psi0_solve(f, 1.0, 0.4, &t.measure).unwrap();
        let b = lambda_inverse(&t, -f).unwrap();
        assert!((a - b).abs() <= 1e-10, "f {f}: {a} {b}");
    }
}

#[test]
fn u1_examples() {
    let c = RiccatiCoeffs::new(0.0, -0.3, 0.4, 1.0, 0.04, 0.04).unwrap();
    assert_eq!(u1(&c).unwrap(), 0.0);
    for rho in [0.0, -0.5, -1.0] {
        let c1 = RiccatiCoeffs::new(1.0, rho, 0.4, 1.0, 0.04, 0.04).unwrap();
        assert_eq!(u1(&c1).unwrap(), 0.0);
    }
    let c = c.with_p(0.5);
    let w = u1(&c).unwrap();
    let (l, rho, nu, p) = (1.0f64, -0.3f64, 0.4f64, 0.5f64);
    let quadratic =
        (l - p * nu * rho - (l * l - 2.0 * l * rho * nu * p + nu * nu * p * (1.0 - p * (1.0 - rho * rho))).sqrt()) / (nu * nu);
    assert!((w - quadratic).abs() < 1e-14);
    assert!(c.riccati_f(w).abs() <= 1e-14);
    assert!(w < 0.0);
}

#[test]
fn u1_rejects_invalid() {
    assert!(RiccatiCoeffs::new(1.5, -0.3, 0.4, 1.0, 0.04, 0.04).is_err());
    assert!(RiccatiCoeffs::new(0.5, 0.3, 0.4, 1.0, 0.04, 0.04).is_err());
}

#[test]
fn nig_log_mgf_examples() {
    let c = RiccatiCoeffs::new(0.5, -0.3, 0.4, 1.0, 0.04, 0.04).unwrap();
    assert_eq!(nig_log_mgf(&c, 0.5, 0.0).unwrap(), 0.0);
    assert_eq!(nig_log_mgf(&c, 1.0, 3.0).unwrap(), 0.0);
    let v = nig_log_mgf(&c, 0.5, 1.0).unwrap();
    assert!((v - c.lambda * c.theta * u1(&c).unwrap()).abs() < 1e-16);
    let v2 = nig_log_mgf(&c, 0.5, 2.5).unwrap();
    assert!((v2 - 2.5 * v).abs() < 1e-15);
}

#[test]
fn brownian_hitting_laplace() {
    let (g, s2) = (0.6, 0.8);
    let x = SpectrallyNegative::new(g, s2, LevyMeasureSpec::None).unwrap();
    for &b in &[0.5, 1.0, 2.0] {
        assert_eq!(hitting_laplace(&x, 0.0, 3.0).unwrap(), 1.0);
        assert_eq!(hitting_laplace(&x, b, 0.0).unwrap(), 1.0);
        for &q in &[0.5, 1.0, 2.0] {
            let exact = (-b * (-g + (g * g + 2.0 * s2 * q).sqrt()) / s2).exp();
            let v = hitting_laplace(&x, b, q).unwrap();
            assert!((v - exact).abs() <= 1e-10 * exact);
        }
    }
    assert!(SpectrallyNegative::new(-0.1, 1.0, LevyMeasureSpec::None).is_err());
}

#[test]
fn v_exponent_monotone_and_convex() {
    let x = SpectrallyNegative::new(1.0, 0.16, fig1_measure()).unwrap();
    let h = 1e-3;
    for i in 1..400 {
        let p = i as f64 * 0.02;
        assert!(v_exponent(&x, p + h).unwrap() > v_exponent(&x, p).unwrap());
        let fd = v_exponent(&x, p + h).unwrap() - 2.0 * v_exponent(&x, p).unwrap() + v_exponent(&x, p - h).unwrap();
        assert!(fd >= 0.0);
    }
    let mut q = 1e-3;
    while q < 1e3 {
        let p = v_inverse(&x, q).unwrap();
        assert!((v_exponent(&x, p).unwrap() - q).abs() <= 1e-10 * (1.0 + q));
        q *= 2.3;
    }
}

#[test]
fn mirrored_triple_links_v_and_lambda() {
    let x = SpectrallyNegative::new(1.0, 0.16, fig1_measure()).unwrap();
    let t = x.mirrored();
    for &q in &[0.5, 1.0, 2.0] {
        let a = v_inverse(&x, q).unwrap();
        let b = lambda_inverse(&t, q).unwrap();
        assert!((a + b).abs() < 1e-10);
    }
}

#[test]
fn subordinator_fdd_examples() {
    let t = fig1_triple();
    let flat = Curve::flat(0.04);
    assert_eq!(subordinator_fdd_log_mgf(&t, &flat, &[0.3, 0.7], &[0.0, 0.0]).unwrap(), 0.0);
    let (s1, u1v) = (0.6, -0.8);
    let v = subordinator_fdd_log_mgf(&t, &flat, &[s1], &[u1v]).unwrap();
    let expect = 1.0 * 0.04 * s1 * lambda_inverse(&t, -u1v).unwrap();
    assert!((v - expect).abs() < 1e-14);
    // two times with a sloped curve
    let curve = Curve::new(vec![0.0, 1.0], vec![0.02, 0.06]).unwrap();
    let v2 = subordinator_fdd_log_mgf(&t, &curve, &[0.4, 0.9], &[-0.5, -0.3]).unwrap();
    let a = lambda_inverse(&t, 0.8).unwrap() * curve.integral(0.0, 0.4)
        + lambda_inverse(&t, 0.3).unwrap() * curve.integral(0.4, 0.9);
    assert!((v2 - a).abs() < 1e-13);
    assert!(subordinator_fdd_log_mgf(&t, &flat, &[0.5, 0.4], &[-1.0, -1.0]).is_err());
    assert!(subordinator_fdd_log_mgf(&t, &flat, &[0.5], &[1.0]).is_err());
}

#[test]
fn tabulated_measure_against_quadrature() {
    let x: Vec<f64> = (0..=40).map(|i| 0.05 + i as f64 * 0.05).collect();
    let d: Vec<f64> = x.iter().map(|v| (-2.0 * v).exp() / v).collect();
    let m = LevyMeasureSpec::Tabulated(TabulatedDensity::new(x, d).unwrap());
    for &w in &[-3.0, -0.5, 0.5] {
        let a = v1(&m, w).unwrap();
        let b = v1_quadrature(&m, w).unwrap();
        assert!((a - b).abs() < 1e-12 * b.abs(), "{a} {b}");
    }
    let d1 = h_tilde(&m, -0.7, -0.7).unwrap();
    let fd = (v1(&m, -0.7 + 1e-5).unwrap() - v1(&m, -0.7 - 1e-5).unwrap()) / 2e-5;
    assert!((d1 - fd).abs() < 1e-8);
}

#[test]
fn curve_integral_is_exact() {
    let c = Curve::new(vec![0.0, 0.5, 1.0], vec![1.0, 3.0, 2.0]).unwrap();
    assert!((c.integral(0.0, 1.0) - 2.25).abs() < 1e-15);
    assert!((c.integral(0.25, 0.75) - (0.25 * (2.0 + 3.0) / 2.0 + 0.25 * (3.0 + 2.5) / 2.0)).abs() < 1e-15);
    assert_eq!(c.eval(5.0), 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn v1_closed_form_vs_quadrature(w in -5.0f64..0.0) {
        let m = fig1_measure();
        let a = v1(&m, w).unwrap();
        let b = v1_quadrature(&m, w).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300), "w {} {} {}", w, a, b);
    }

    #[test]
    fn h_tilde_symmetric_and_nonpositive(w1 in -5.0f64..0.0, w2 in -5.0f64..0.0) {
        let m = fig1_measure();
        let a = h_tilde(&m, w1, w2).unwrap();
        let b = h_tilde(&m, w2, w1).unwrap();
        prop_assert!(a <= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn lambda_inverse_round_trip(lq in -4.0f64..4.0, sigma in 0.0f64..1.0, lam in 0.1f64..3.0) {
        let q = 10f64.powf(lq);
        let t = LevyTriple::model(lam, sigma, fig1_measure()).unwrap();
        let u = lambda_inverse(&t, q).unwrap();
        prop_assert!(u <= 0.0);
        prop_assert!((big_lambda(&t, u).unwrap() - q).abs() <= 1e-10 * (1.0 + q));
    }
}
