//! Jump functionals, Lévy exponents and their monotone inverses.
//!
//! Measures live on (0, inf). `v1(w) = int (e^{wx} - 1 - wx) nu(dx)`.

use crate::error::{Result, VlxError};
use crate::quad::{self, GaussRule};
use crate::specfun::gamma;

/// One-sided tempered-stable density C e^{-Mx} x^{-1-Y} on (0, inf).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cgmy {
    pub c: f64,
    pub m: f64,
    pub y: f64,
}

impl Cgmy {
    pub fn new(c: f64, m: f64, y: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(VlxError::param("C", format!("must be positive, got {c}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(VlxError::param("M", format!("must be positive, got {m}")));
        }
        if !(y > 0.0 && y < 2.0) || y == 1.0 {
            return Err(VlxError::param("Y", format!("must lie in (0, 2) without 1, got {y}")));
        }
        Ok(Cgmy { c, m, y })
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.c * (-self.m * x).exp() * x.powf(-1.0 - self.y)
    }

    fn v1(&self, p: f64) -> Result<f64> {
        let Cgmy { c, m, y } = *self;
        if p >= m {
            return Err(VlxError::Domain(format!("CGMY exponent needs w < M = {m}, got {p}")));
        }
        let x = p / m;
        // (1-x)^Y - 1 + Yx, by series where it cancels
        let core = if x.abs() < 0.1 {
            let mut term = y * (y - 1.0) / 2.0 * x * x;
            let mut s = 0.0f64;
            let mut k = 2.0;
            while term.abs() > 1e-18 * s.abs().max(1e-300) {
                s += term;
                term *= -(y - k) / (k + 1.0) * x;
                k += 1.0;
                if k > 200.0 {
                    break;
                }
            }
            s
        } else {
            (y * (-x).ln_1p()).exp_m1() + y * x
        };
        Ok(c * m.powf(y) * core * gamma(-y))
    }

    fn v1_prime(&self, p: f64) -> Result<f64> {
        let Cgmy { c, m, y } = *self;
        if p >= m {
            return Err(VlxError::Domain(format!("CGMY exponent needs w < M = {m}, got {p}")));
        }
        // Y [M^{Y-1} - (M-p)^{Y-1}]
        let d = -((y - 1.0) * (-p / m).ln_1p()).exp_m1();
        Ok(c * gamma(-y) * y * m.powf(y - 1.0) * d)
    }

    /// int x^2 nu(dx) = C Gamma(2-Y) M^{Y-2}.
    pub fn second_moment(&self) -> f64 {
        self.c * gamma(2.0 - self.y) * self.m.powf(self.y - 2.0)
    }
}

/// Piecewise-linear density on `[x_0, x_last]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    nodes: Vec<(f64, f64)>,
}

impl TabulatedDensity {
    pub fn new(x: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != density.len() {
            return Err(VlxError::param("density", "need at least two (x, density) pairs of equal length"));
        }
        if !(x[0] >= 0.0) || x.windows(2).any(|w| !(w[1] > w[0])) || !x[x.len() - 1].is_finite() {
            return Err(VlxError::param("density", "abscissae must be finite, non-negative and increasing"));
        }
        if density.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(VlxError::param("density", "values must be finite and non-negative"));
        }
        let rule = GaussRule::legendre(8);
        let mut nodes = Vec::with_capacity(8 * (x.len() - 1));
        for i in 0..x.len() - 1 {
            let h = x[i + 1] - x[i];
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let d = density[i] * (1.0 - t) + density[i + 1] * t;
                nodes.push((x[i] + t * h, w * h * d));
            }
        }
        Ok(TabulatedDensity { x, density, nodes })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] {
            return 0.0;
        }
        let i = self.x.partition_point(|v| *v <= x).clamp(1, n - 1) - 1;
        let t = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.density[i] * (1.0 - t) + self.density[i + 1] * t
    }

    /// int g(x) nu(dx) with the cached nodes.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes.iter().map(|(x, w)| w * g(*x)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum LevyMeasureSpec {
    #[default]
    None,
    Cgmy(Cgmy),
    Tabulated(TabulatedDensity),
}

fn em1_lin(z: f64) -> f64 {
    // e^z - 1 - z without cancellation
    if z.abs() < 1e-2 {
        let mut term = z * z / 2.0;
        let mut s = 0.0f64;
        let mut k = 2.0;
        while term.abs() > 1e-18 * s.abs().max(1e-300) {
            s += term;
            k += 1.0;
            term *= z / k;
        }
        s
    } else {
        z.exp_m1() - z
    }
}

impl LevyMeasureSpec {
    pub fn cgmy(c: f64, m: f64, y: f64) -> Result<Self> {
        Ok(LevyMeasureSpec::Cgmy(Cgmy::new(c, m, y)?))
    }

    pub fn is_none(&self) -> bool {
        matches!(self, LevyMeasureSpec::None)
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            LevyMeasureSpec::None => 0.0,
            LevyMeasureSpec::Cgmy(c) => c.density(x),
            LevyMeasureSpec::Tabulated(t) => t.eval(x),
        }
    }

    /// int x^2 nu(dx).
    pub fn second_moment(&self) -> f64 {
        match self {
            LevyMeasureSpec::None => 0.0,
            LevyMeasureSpec::Cgmy(c) => c.second_moment(),
            LevyMeasureSpec::Tabulated(t) => t.integrate(|x| x * x),
        }
    }

    /// Upper end of the admissible exponent range (w must stay below it).
    pub fn w_max(&self) -> f64 {
        match self {
            LevyMeasureSpec::Cgmy(c) => c.m,
            _ => f64::INFINITY,
        }
    }
}

/// V1(w) = int (e^{wx} - 1 - wx) nu(dx).
pub fn v1(measure: &LevyMeasureSpec, w: f64) -> Result<f64> {
    match measure {
        LevyMeasureSpec::None => Ok(0.0),
        LevyMeasureSpec::Cgmy(c) => c.v1(w),
        LevyMeasureSpec::Tabulated(t) => {
            if w > 0.0 && w * t.x[t.x.len() - 1] > 700.0 {
                return Err(VlxError::Domain(format!("exponent {w} overflows on the tabulated support")));
            }
            Ok(t.integrate(|x| em1_lin(w * x)))
        }
    }
}

/// V1'(w) = int x (e^{wx} - 1) nu(dx).
pub fn v1_prime(measure: &LevyMeasureSpec, w: f64) -> Result<f64> {
    match measure {
        LevyMeasureSpec::None => Ok(0.0),
        LevyMeasureSpec::Cgmy(c) => c.v1_prime(w),
        LevyMeasureSpec::Tabulated(t) => Ok(t.integrate(|x| x * (w * x).exp_m1())),
    }
}

/// V1 by direct quadrature of the measure; the reference for the closed forms.
///
/// Splits at x = 1. Below `delta` the integrand is replaced by its quadratic
/// term w^2 x^2 / 2, whose integral against the density is closed form for CGMY.
pub fn v1_quadrature(measure: &LevyMeasureSpec, w: f64) -> Result<f64> {
    const DELTA: f64 = 1e-6;
    match measure {
        LevyMeasureSpec::None => Ok(0.0),
        LevyMeasureSpec::Tabulated(t) => {
            let g = |x: f64| em1_lin(w * x) * t.eval(x);
            quad::integrate_pieces(g, &t.x, 1e-15, 1e-13)
        }
        LevyMeasureSpec::Cgmy(c) => {
            if w >= c.m {
                return Err(VlxError::Domain(format!("CGMY exponent needs w < M = {}, got {w}", c.m)));
            }
            let g = |x: f64| em1_lin(w * x) * c.density(x);
            let head = 0.5 * w * w * c.c * DELTA.powf(2.0 - c.y) / (2.0 - c.y);
            // the remaining x^{1-Y} behaviour is smoothed by y = x^{2-Y}
            let e = 2.0 - c.y;
            let smooth = |x: f64| g(x) * x.powf(1.0 - e);
            let mid = quad::integrate_left_singular(smooth, 0.0, 1.0, e, 1e-16, 1e-13)?
                - quad::integrate_left_singular(smooth, 0.0, DELTA, e, 1e-18, 1e-13)?;
            let tail = quad::integrate_to_inf(g, 1.0, 1e-16, 1e-13)?;
            Ok(head + mid + tail)
        }
    }
}

/// Gbar(w) = sigma^2 w^2 / 2 + V1(w) for w <= 0.
pub fn gbar(sigma: f64, measure: &LevyMeasureSpec, w: f64) -> Result<f64> {
    if w > 0.0 {
        return Err(VlxError::Domain(format!("Gbar is used on w <= 0, got {w}")));
    }
    Ok(0.5 * sigma * sigma * w * w + v1(measure, w)?)
}

/// h(w) = V1(w)/w for w < 0 and 0 otherwise.
pub fn h_fn(measure: &LevyMeasureSpec, w: f64) -> Result<f64> {
    if w >= 0.0 {
        return Ok(0.0);
    }
    Ok(v1(measure, w)? / w)
}

/// Difference quotient of V1 on the negative quadrant, V1' on the diagonal.
pub fn h_tilde(measure: &LevyMeasureSpec, w1: f64, w2: f64) -> Result<f64> {
    if w1 > 0.0 || w2 > 0.0 {
        return Err(VlxError::Domain(format!("h_tilde needs w1, w2 <= 0, got ({w1}, {w2})")));
    }
    let d = w1 - w2;
    if d == 0.0 {
        return v1_prime(measure, w1);
    }
    if d.abs() < 1e-6 * (1.0 + w1.abs()) {
        return v1_prime(measure, 0.5 * (w1 + w2));
    }
    Ok((v1(measure, w1)? - v1(measure, w2)?) / d)
}

/// Lévy triple (drift, sigma^2, nu) of a process with positive jumps.
/// The drift is -lambda in the rescaled model.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriple {
    pub drift: f64,
    pub sigma2: f64,
    pub measure: LevyMeasureSpec,
}

impl LevyTriple {
    pub fn new(drift: f64, sigma2: f64, measure: LevyMeasureSpec) -> Result<Self> {
        if !drift.is_finite() {
            return Err(VlxError::param("drift", "must be finite"));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(VlxError::param("sigma2", format!("must be non-negative, got {sigma2}")));
        }
        Ok(LevyTriple { drift, sigma2, measure })
    }

    /// Triple (-lambda, sigma^2, nu) of the rescaled model.
    pub fn model(lambda: f64, sigma: f64, measure: LevyMeasureSpec) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(VlxError::param("lambda", format!("must be positive, got {lambda}")));
        }
        Self::new(-lambda, sigma * sigma, measure)
    }

    fn check_decreasing(&self) -> Result<()> {
        if self.drift > 0.0 || (self.drift == 0.0 && self.sigma2 == 0.0 && self.measure.is_none()) {
            return Err(VlxError::param("drift", "Lambda must be strictly decreasing on u <= 0 (need drift <= 0, non-degenerate)"));
        }
        Ok(())
    }
}

/// Lambda(u) = drift u + sigma^2 u^2 / 2 + V1(u).
pub fn big_lambda(triple: &LevyTriple, u: f64) -> Result<f64> {
    Ok(triple.drift * u + 0.5 * triple.sigma2 * u * u + v1(&triple.measure, u)?)
}

fn big_lambda_prime(triple: &LevyTriple, u: f64) -> Result<f64> {
    Ok(triple.drift + triple.sigma2 * u + v1_prime(&triple.measure, u)?)
}

/// Root of a strictly monotone `g` inside `[lo, hi]` where g(lo), g(hi) bracket 0.
/// Bisection to width `width`, then safeguarded Newton.
fn bisect_newton<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64, width: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    let (l0, h0) = (lo, hi);
    let glo = g(lo)?;
    let rising = glo < 0.0;
    let mut it = 0;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let v = g(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if (v < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
        if it > 300 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let v = g(x)?;
        if v.abs() <= tol {
            return Ok(x);
        }
        let d = dg(x)?;
        let mut next = x - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (v < 0.0) == rising {
            lo = x;
        } else {
            hi = x;
        }
        if next == x {
            break;
        }
        x = next;
    }
    // bisect to machine precision if Newton stalled
    while hi - lo > 4.0 * f64::EPSILON * (1.0 + x.abs()) {
        let mid = 0.5 * (lo + hi);
        let v = g(mid)?;
        if (v < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        x = mid;
    }
    let v = g(x)?;
    if v.abs() <= tol * 10.0 {
        Ok(x)
    } else {
        Err(VlxError::Bracket { lo: l0, hi: h0, msg: format!("residual {v:e} after root polish") })
    }
}

/// The unique u <= 0 with Lambda(u) = q.
pub fn lambda_inverse(triple: &LevyTriple, q: f64) -> Result<f64> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(VlxError::Domain(format!("Lambda inverse needs q >= 0, got {q}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    triple.check_decreasing()?;
    let mut lo = -1.0;
    let mut n = 0;
    while big_lambda(triple, lo)? < q {
        lo *= 2.0;
        n += 1;
        if n > 1100 || !lo.is_finite() {
            return Err(VlxError::Bracket { lo, hi: 0.0, msg: format!("Lambda never reaches {q}") });
        }
    }
    let g = |u: f64| Ok(big_lambda(triple, u)? - q);
    let dg = |u: f64| big_lambda_prime(triple, u);
    bisect_newton(g, dg, lo, 0.0, 1e-8, 1e-12 * (1.0 + q))
}

/// Root psi0 <= 0 of f - lambda w + Gbar(w) = 0, by plain bisection.
pub fn psi0_solve(f_val: f64, lambda: f64, sigma: f64, measure: &LevyMeasureSpec) -> Result<f64> {
    if !(f_val <= 0.0) {
        return Err(VlxError::Domain(format!("forcing must be non-positive, got {f_val}")));
    }
    if !(lambda > 0.0) {
        return Err(VlxError::param("lambda", format!("must be positive, got {lambda}")));
    }
    if f_val == 0.0 {
        return Ok(0.0);
    }
    let g = |w: f64| -> Result<f64> { Ok(f_val - lambda * w + gbar(sigma, measure, w)?) };
    // g(0) = f < 0 and g grows without bound as w -> -inf
    let mut lo = f_val / lambda;
    let mut n = 0;
    while g(lo)? < 0.0 {
        lo *= 2.0;
        n += 1;
        if n > 1100 {
            return Err(VlxError::Bracket { lo, hi: 0.0, msg: "no sign change".into() });
        }
    }
    let mut hi = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Parameters of the Prop 1.1 Riccati equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiCoeffs {
    pub p: f64,
    pub rho: f64,
    pub nu: f64,
    pub lambda: f64,
    pub theta: f64,
    pub v0: f64,
}

impl RiccatiCoeffs {
    pub fn new(p: f64, rho: f64, nu: f64, lambda: f64, theta: f64, v0: f64) -> Result<Self> {
        let c = RiccatiCoeffs { p, rho, nu, lambda, theta, v0 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(VlxError::param("p", format!("must lie in [0, 1], got {}", self.p)));
        }
        if !(-1.0..=0.0).contains(&self.rho) {
            return Err(VlxError::param("rho", format!("must lie in [-1, 0], got {}", self.rho)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(VlxError::param("nu", format!("must be positive, got {}", self.nu)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(VlxError::param("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(VlxError::param("theta", format!("must be positive, got {}", self.theta)));
        }
        if !(self.v0 >= 0.0 && self.v0.is_finite()) {
            return Err(VlxError::param("v0", format!("must be non-negative, got {}", self.v0)));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> Self {
        RiccatiCoeffs { p, ..*self }
    }

    /// F(w) = (p^2 - p)/2 + (rho p nu - lambda) w + nu^2 w^2 / 2.
    pub fn riccati_f(&self, w: f64) -> f64 {
        let p = self.p;
        0.5 * (p * p - p) + (self.rho * p * self.nu - self.lambda) * w + 0.5 * self.nu * self.nu * w * w
    }
}

/// Smaller root of F, written in the cancellation-free form.
pub fn u1(c: &RiccatiCoeffs) -> Result<f64> {
    let p = c.p;
    let b = c.lambda - c.rho * p * c.nu;
    let disc = c.lambda * c.lambda - 2.0 * c.lambda * c.rho * c.nu * p
        + c.nu * c.nu * p * (1.0 - p * (1.0 - c.rho * c.rho));
    if disc < 0.0 {
        return Err(VlxError::Domain(format!("negative discriminant {disc} in U1")));
    }
    Ok((p * p - p) / (b + disc.sqrt()))
}

/// lambda theta U1(p) t.
pub fn nig_log_mgf(c: &RiccatiCoeffs, p: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(c.lambda * c.theta * u1(&c.with_p(p))? * t)
}

/// Spectrally negative process X given through its mirror image: jumps of X
/// are -J with J ~ `measure` on (0, inf).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrallyNegative {
    /// gamma = E[X_1] >= 0
    pub mean: f64,
    pub sigma2: f64,
    pub measure: LevyMeasureSpec,
}

impl SpectrallyNegative {
    pub fn new(mean: f64, sigma2: f64, measure: LevyMeasureSpec) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(VlxError::param("gamma", format!("E[X_1] must be non-negative, got {mean}")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(VlxError::param("sigma2", format!("must be non-negative, got {sigma2}")));
        }
        if mean == 0.0 && sigma2 == 0.0 && measure.is_none() {
            return Err(VlxError::param("gamma", "the zero process never hits a positive level"));
        }
        Ok(SpectrallyNegative { mean, sigma2, measure })
    }

    /// -X as a triple with positive jumps.
    pub fn mirrored(&self) -> LevyTriple {
        LevyTriple { drift: -self.mean, sigma2: self.sigma2, measure: self.measure.clone() }
    }
}

/// V(p) = sigma^2 p^2 / 2 + gamma p + int_{R-} (e^{px} - 1 - px) nu_X(dx), p >= 0.
pub fn v_exponent(x: &SpectrallyNegative, p: f64) -> Result<f64> {
    Ok(0.5 * x.sigma2 * p * p + x.mean * p + v1(&x.measure, -p)?)
}

/// Inverse of V on [0, inf).
pub fn v_inverse(x: &SpectrallyNegative, q: f64) -> Result<f64> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(VlxError::Domain(format!("V inverse needs q >= 0, got {q}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut n = 0;
    while v_exponent(x, hi)? < q {
        hi *= 2.0;
        n += 1;
        if n > 1100 {
            return Err(VlxError::Bracket { lo: 0.0, hi, msg: format!("V never reaches {q}") });
        }
    }
    let g = |p: f64| Ok(v_exponent(x, p)? - q);
    let dg = |p: f64| Ok(x.sigma2 * p + x.mean - v1_prime(&x.measure, -p)?);
    bisect_newton(g, dg, 0.0, hi, 1e-8, 1e-12 * (1.0 + q))
}

/// E[e^{-q tau_b}] = e^{-b V^{-1}(q)}.
pub fn hitting_laplace(x: &SpectrallyNegative, b: f64, q: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(VlxError::Domain(format!("barrier must be non-negative, got {b}")));
    }
    if b == 0.0 || q == 0.0 {
        return Ok(1.0);
    }
    Ok((-b * v_inverse(x, q)?).exp())
}

/// Piecewise-linear curve, constant beyond its end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl Curve {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != v.len() {
            return Err(VlxError::param("curve", "need matching non-empty knot and value lists"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(VlxError::param("curve", "knots must be increasing"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(VlxError::param("curve", "values must be finite"));
        }
        Ok(Curve { t, v })
    }

    pub fn flat(value: f64) -> Self {
        Curve { t: vec![0.0], v: vec![value] }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.t.len();
        if n == 1 || s <= self.t[0] {
            return self.v[0];
        }
        if s >= self.t[n - 1] {
            return self.v[n - 1];
        }
        let i = self.t.partition_point(|x| *x <= s) - 1;
        let w = (s - self.t[i]) / (self.t[i + 1] - self.t[i]);
        self.v[i] * (1.0 - w) + self.v[i + 1] * w
    }

    pub fn min(&self) -> f64 {
        self.v.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// int_a^b of the curve, exact for the piecewise-linear form.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut pts = vec![a];
        pts.extend(self.t.iter().cloned().filter(|x| *x > a && *x < b));
        pts.push(b);
        pts.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1]))).sum()
    }
}

fn check_fdd(times: &[f64], u: &[f64]) -> Result<()> {
    if times.is_empty() || times.len() != u.len() {
        return Err(VlxError::param("times", "need matching non-empty times and weights"));
    }
    if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(VlxError::param("times", "must be positive and strictly increasing"));
    }
    if u.iter().any(|x| !(*x <= 0.0)) {
        return Err(VlxError::param("u", "weights must be non-positive"));
    }
    Ok(())
}

/// Tail sums U_i = u_i + ... + u_n.
pub fn tail_sums(u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    let mut acc = 0.0;
    for i in (0..u.len()).rev() {
        acc += u[i];
        out[i] = acc;
    }
    out
}

/// log E[exp(sum u_i X_{g(s_i)})] for X_t = H_{-t} and g' = lambda xi.
pub fn subordinator_fdd_log_mgf(triple: &LevyTriple, xi00: &Curve, times: &[f64], u: &[f64]) -> Result<f64> {
    check_fdd(times, u)?;
    if xi00.min() < 0.0 {
        return Err(VlxError::param("xi0", "forward variance must be non-negative"));
    }
    let lambda = -triple.drift;
    let sums = tail_sums(u);
    let mut total = 0.0;
    let mut prev = 0.0;
    for (i, &s) in times.iter().enumerate() {
        let psi = lambda_inverse(triple, -sums[i])?;
        if psi != 0.0 {
            let mut breaks = vec![prev];
            breaks.extend(xi00.t.iter().cloned().filter(|x| *x > prev && *x < s));
            breaks.push(s);
            let area = quad::integrate_pieces(|r| xi00.eval(r), &breaks, 1e-15, 1e-13)?;
            total += lambda * psi * area;
        }
        prev = s;
    }
    Ok(total)
}

/// Cumulant of the subordinator per unit time: log E[e^{u X_1}] = Lambda^{-1}(-u).
pub fn subordinator_cgf(triple: &LevyTriple, u: f64) -> Result<f64> {
    if !(u <= 0.0) {
        return Err(VlxError::Domain(format!("subordinator cgf is used for u <= 0, got {u}")));
    }
    lambda_inverse(triple, -u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_branch_matches_direct_form() {
        let c = Cgmy::new(1.0, 3.0, 1.5).unwrap();
        for &p in &[-0.31, -0.29, 0.29, 0.31] {
            let x: f64 = p / 3.0;
            let direct = c.c * c.m.powf(c.y) * ((1.0 - x).powf(c.y) - 1.0 + c.y * x) * gamma(-c.y);
            assert!((c.v1(p).unwrap() - direct).abs() < 1e-12 * direct.abs());
        }
    }

    #[test]
    fn em1_lin_small_and_large() {
        // x^2/2 + x^3/6 + x^4/24 + x^5/120 at x = 1e-3
        assert!((em1_lin(1e-3) - 5.001_667_083_416_681e-7).abs() < 1e-21);
        assert!((em1_lin(-2.0) - ((-2.0f64).exp() + 1.0)).abs() < 1e-15);
    }
}
