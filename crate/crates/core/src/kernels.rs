//! Power and Mittag-Leffler kernels, resolvents of the second kind and linear
//! Volterra equations on uniform grids.
//!
//! Kernels are stored as `t^(g-1) a(t)` with `a` sampled at the nodes and
//! treated as piecewise linear. Convolutions integrate the singular factors
//! exactly against the linear pieces.

use crate::error::{Result, VlxError};
use crate::quad::{self, GaussRule};
use crate::specfun::{gamma, ml, rgamma, GridFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Power,
    MittagLeffler,
}

/// `Power`: K(t) = t^(a-1)/Gamma(a).
/// `MittagLeffler`: kappa(t) = (1/eps) t^(a-1) E_{a,a}(-(lambda/eps) t^a).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl KernelSpec {
    /// Power kernel. Any alpha in (0, 1] is accepted so that the hyper-rough
    /// regime can be explored.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(VlxError::param("alpha", format!("power kernel needs alpha in (0, 1], got {alpha}")));
        }
        Ok(KernelSpec { kind: KernelKind::Power, alpha, lambda: 0.0, epsilon: 1.0 })
    }

    pub fn mittag_leffler(alpha: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(VlxError::param("alpha", format!("must lie in (1/2, 1], got {alpha}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(VlxError::param("lambda", format!("must be positive, got {lambda}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(VlxError::param("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(KernelSpec { kind: KernelKind::MittagLeffler, alpha, lambda, epsilon })
    }

    /// Rate of the Mittag-Leffler factor, lambda/eps.
    pub fn rate(&self) -> f64 {
        self.lambda / self.epsilon
    }
}

pub fn kernel_eval(spec: &KernelSpec, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(VlxError::Domain(format!("kernel is singular at 0; need t > 0, got {t}")));
    }
    let a = spec.alpha;
    match spec.kind {
        KernelKind::Power => Ok(t.powf(a - 1.0) * rgamma(a)),
        KernelKind::MittagLeffler => {
            let c = spec.rate();
            Ok(t.powf(a - 1.0) * ml(a, a, -c * t.powf(a))? / spec.epsilon)
        }
    }
}

/// f^{a,lambda}(t) = lambda t^(a-1) E_{a,a}(-lambda t^a).
pub fn ml_density(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(VlxError::Domain(format!("density needs t > 0, got {t}")));
    }
    Ok(lambda * t.powf(alpha - 1.0) * ml(alpha, alpha, -lambda * t.powf(alpha))?)
}

/// int_0^t f^{a,lambda} = 1 - E_a(-lambda t^a), written without cancellation.
pub fn ml_cdf(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let x = lambda * t.powf(alpha);
    if x > 1.0 {
        return Ok(1.0 - ml(alpha, 1.0, -x)?);
    }
    Ok(x * ml(alpha, alpha + 1.0, -x)?)
}

/// int_0^t lambda kappa(s) ds for a Mittag-Leffler kernel.
pub fn kappa_mass(spec: &KernelSpec, t: f64) -> Result<f64> {
    if spec.kind != KernelKind::MittagLeffler {
        return Err(VlxError::param("kind", "kappa mass is defined for the Mittag-Leffler kernel"));
    }
    ml_cdf(spec.alpha, spec.rate(), t)
}

/// A kernel k(t) = t^(g-1) a(t) with the smooth factor sampled at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub gamma: f64,
    pub dt: f64,
    pub a: Vec<f64>,
}

impl KernelGrid {
    pub fn new(gamma: f64, dt: f64, a: Vec<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(VlxError::param("gamma", format!("singularity exponent must lie in (0, 1], got {gamma}")));
        }
        if !(dt > 0.0) {
            return Err(VlxError::param("dt", format!("must be positive, got {dt}")));
        }
        if a.len() < 2 {
            return Err(VlxError::param("a", "kernel grid needs at least two nodes"));
        }
        Ok(KernelGrid { gamma, dt, a })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(gamma: f64, dt: f64, n: usize, a: F) -> Result<Self> {
        Self::new(gamma, dt, (0..=n).map(|k| a(k as f64 * dt)).collect())
    }

    /// Constant kernel k = c.
    pub fn constant(c: f64, dt: f64, n: usize) -> Result<Self> {
        Self::new(1.0, dt, vec![c; n + 1])
    }

    pub fn from_spec(spec: &KernelSpec, dt: f64, n: usize) -> Result<Self> {
        let a = spec.alpha;
        match spec.kind {
            KernelKind::Power => Self::new(a, dt, vec![rgamma(a); n + 1]),
            KernelKind::MittagLeffler => {
                let c = spec.rate();
                let mut v = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    let t = k as f64 * dt;
                    v.push(ml(a, a, -c * t.powf(a))? / spec.epsilon);
                }
                Self::new(a, dt, v)
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        KernelGrid { gamma: self.gamma, dt: self.dt, a: self.a.iter().map(|v| v * c).collect() }
    }

    pub fn n(&self) -> usize {
        self.a.len() - 1
    }

    /// k(t_j) for j >= 1.
    pub fn value(&self, j: usize) -> f64 {
        (j as f64 * self.dt).powf(self.gamma - 1.0) * self.a[j]
    }
}

/// nu_p(k) = int_0^1 (k-1+v)^(g-1) v^p dv for p = 0, 1, 2.
#[derive(Debug, Clone)]
pub struct LagMoments {
    pub gamma: f64,
    pub dt: f64,
    nu: Vec<[f64; 3]>,
}

impl LagMoments {
    pub fn new(gamma: f64, dt: f64, n: usize) -> Self {
        let nu = (1..=n).map(|k| lag_moment(gamma, k)).collect();
        LagMoments { gamma, dt, nu }
    }

    pub fn get(&self, k: usize) -> [f64; 3] {
        self.nu[k - 1]
    }
}

fn lag_moment(g: f64, k: usize) -> [f64; 3] {
    let m = (k - 1) as f64;
    if k == 1 {
        return [1.0 / g, 1.0 / (g + 1.0), 1.0 / (g + 2.0)];
    }
    if m >= 8.0 {
        let mut out = [0.0; 3];
        let mut coef = 1.0;
        for j in 0..80 {
            let jf = j as f64;
            let mut small = true;
            for (p, o) in out.iter_mut().enumerate() {
                let t = coef / (jf + p as f64 + 1.0);
                *o += t;
                small &= t.abs() < 1e-18 * o.abs();
            }
            if small {
                break;
            }
            coef *= (g - 1.0 - jf) / ((jf + 1.0) * m);
        }
        let base = m.powf(g - 1.0);
        return [out[0] * base, out[1] * base, out[2] * base];
    }
    let kf = k as f64;
    let d0 = (kf.powf(g) - m.powf(g)) / g;
    let d1 = (kf.powf(g + 1.0) - m.powf(g + 1.0)) / (g + 1.0);
    let d2 = (kf.powf(g + 2.0) - m.powf(g + 2.0)) / (g + 2.0);
    [d0, d1 - m * d0, d2 - 2.0 * m * d1 + m * m * d0]
}

/// int_0^{t_n} (t_n - s)^(g-1) A(t_n - s) X(s) ds for piecewise-linear A, X,
/// excluding the contribution of x_n (returned separately as a coefficient).
fn lag_conv_split(mom: &LagMoments, a: &[f64], x: &[f64], n: usize) -> (f64, f64) {
    let mut s = 0.0;
    let mut diag = 0.0;
    for c in 1..=n {
        let k = n - c + 1;
        let nu = mom.get(k);
        let a0 = a[k - 1];
        let da = a[k] - a[k - 1];
        if c == n {
            // X = x_n (1 - v) + x_{n-1} v
            let xo = x[n - 1];
            s += a0 * xo * nu[1] + da * xo * nu[2];
            diag = a0 * (nu[0] - nu[1]) + da * (nu[1] - nu[2]);
        } else {
            let x0 = x[c];
            let dx = x[c - 1] - x[c];
            s += a0 * x0 * nu[0] + (a0 * dx + da * x0) * nu[1] + da * dx * nu[2];
        }
    }
    let h = mom.dt.powf(mom.gamma);
    (s * h, diag * h)
}

/// Discrete (k * x)(t_n) under the piecewise-linear model.
pub fn lag_conv(mom: &LagMoments, a: &[f64], x: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (s, d) = lag_conv_split(mom, a, x, n);
    s + d * x[n]
}

/// Moments of (n-y)^(g-1) y^(g-1) (y-m)^p over [m, m+1].
struct TwoSided {
    gamma: f64,
    rule: GaussRule,
    // (m + x_i)^(g-1), row m
    pow: Vec<Vec<f64>>,
}

impl TwoSided {
    fn new(gamma: f64, n: usize) -> Self {
        let rule = GaussRule::legendre(10);
        let pow = (0..n)
            .map(|m| rule.nodes.iter().map(|x| (m as f64 + x).powf(gamma - 1.0)).collect())
            .collect();
        TwoSided { gamma, rule, pow }
    }

    fn moments(&self, n: usize, m: usize) -> [f64; 3] {
        let g = self.gamma;
        if g == 1.0 {
            return [1.0, 0.5, 1.0 / 3.0];
        }
        if n == 1 {
            let b = |p: f64| gamma(g + p) * gamma(g) / gamma(2.0 * g + p);
            return [b(0.0), b(1.0), b(2.0)];
        }
        if m == 0 || m == n - 1 {
            let nf = n as f64;
            let mut out = [0.0; 3];
            let mut coef = 1.0;
            for j in 0..200 {
                let s = g + j as f64;
                let terms = if m == 0 {
                    [1.0 / s, 1.0 / (s + 1.0), 1.0 / (s + 2.0)]
                } else {
                    [1.0 / s, 1.0 / s - 1.0 / (s + 1.0), 1.0 / s - 2.0 / (s + 1.0) + 1.0 / (s + 2.0)]
                };
                for p in 0..3 {
                    out[p] += coef * terms[p];
                }
                coef *= -(g - 1.0 - j as f64) / ((j as f64 + 1.0) * nf);
                if coef.abs() < 1e-19 {
                    break;
                }
            }
            let base = nf.powf(g - 1.0);
            return [out[0] * base, out[1] * base, out[2] * base];
        }
        let q = self.rule.nodes.len();
        let (lo, hi) = (&self.pow[m], &self.pow[n - m - 1]);
        let mut out = [0.0; 3];
        for i in 0..q {
            let x = self.rule.nodes[i];
            let w = self.rule.weights[i] * lo[i] * hi[q - 1 - i];
            out[0] += w;
            out[1] += w * x;
            out[2] += w * x * x;
        }
        out
    }
}

/// Resolvent r of k, stored as r(t) = t^(g-1) b(t).
#[derive(Debug, Clone)]
pub struct ResolventTable {
    pub kernel: KernelGrid,
    pub b: Vec<f64>,
    /// Largest node defect of r + r*k - k, measured in units of t^(g-1).
    pub residual: f64,
}

impl ResolventTable {
    /// r(t_j) for j >= 1.
    pub fn r(&self, j: usize) -> f64 {
        (j as f64 * self.kernel.dt).powf(self.kernel.gamma - 1.0) * self.b[j]
    }

    /// Smooth factor b on the grid.
    pub fn grid(&self) -> GridFn {
        GridFn { dt: self.kernel.dt, values: self.b.clone() }
    }

    /// Solution x = f - r*f of x + k*x = f.
    pub fn apply(&self, f: &GridFn) -> Result<GridFn> {
        check_same_grid(&self.kernel, f)?;
        let mom = LagMoments::new(self.kernel.gamma, self.kernel.dt, f.n());
        let values = (0..=f.n()).map(|n| f.values[n] - lag_conv(&mom, &self.b, &f.values, n)).collect();
        Ok(GridFn { dt: f.dt, values })
    }
}

fn check_same_grid(k: &KernelGrid, f: &GridFn) -> Result<()> {
    if (k.dt - f.dt).abs() > 1e-14 * k.dt || k.n() != f.n() {
        return Err(VlxError::param("grid", "kernel and forcing must share the same grid"));
    }
    Ok(())
}

fn two_sided_cell(mu: [f64; 3], a0: f64, da: f64, b0: f64, db: f64) -> f64 {
    a0 * b0 * mu[0] + (a0 * db + da * b0) * mu[1] + da * db * mu[2]
}

/// Solves r + r*k = k by direct time stepping.
pub fn resolvent_second_kind(k: &KernelGrid, tol: f64) -> Result<ResolventTable> {
    let n = k.n();
    let g = k.gamma;
    let ts = TwoSided::new(g, n);
    let a = &k.a;
    let mut b = vec![0.0; n + 1];
    b[0] = a[0];
    let scale = |j: usize| k.dt.powf(g) * (j as f64).powf(1.0 - g);
    for j in 1..=n {
        let mut s = 0.0;
        let mut coef = 0.0;
        for m in 0..j {
            let mu = ts.moments(j, m);
            let a0 = a[j - m];
            let da = a[j - m - 1] - a[j - m];
            if m == j - 1 {
                s += two_sided_cell(mu, a0, da, b[m], -b[m]);
                coef = a0 * mu[1] + da * mu[2];
            } else {
                s += two_sided_cell(mu, a0, da, b[m], b[m + 1] - b[m]);
            }
        }
        let h = scale(j);
        b[j] = (a[j] - h * s) / (1.0 + h * coef);
        if !b[j].is_finite() {
            return Err(VlxError::Instability(format!("resolvent overflow at node {j}")));
        }
    }
    // recompute the defect with a separate pass over the finished table
    let mut worst = (0.0f64, 0usize);
    for j in 1..=n {
        let mut s = 0.0;
        for m in 0..j {
            let mu = ts.moments(j, m);
            s += two_sided_cell(mu, a[j - m], a[j - m - 1] - a[j - m], b[m], b[m + 1] - b[m]);
        }
        let d = (b[j] + scale(j) * s - a[j]).abs();
        if d > worst.0 {
            worst = (d, j);
        }
    }
    if worst.0 > tol {
        return Err(VlxError::Defect { defect: worst.0, tol, node: worst.1, t: worst.1 as f64 * k.dt });
    }
    Ok(ResolventTable { kernel: k.clone(), b, residual: worst.0 })
}

/// Solves x + k*x = f by direct time stepping.
pub fn linear_vie_solve(k: &KernelGrid, f: &GridFn) -> Result<GridFn> {
    check_same_grid(k, f)?;
    let n = f.n();
    let mom = LagMoments::new(k.gamma, k.dt, n);
    let mut x = vec![0.0; n + 1];
    x[0] = f.values[0];
    for j in 1..=n {
        let (s, d) = lag_conv_split(&mom, &k.a, &x, j);
        x[j] = (f.values[j] - s) / (1.0 + d);
        if !x[j].is_finite() {
            return Err(VlxError::Instability(format!("linear VIE overflow at node {j}")));
        }
    }
    Ok(GridFn { dt: f.dt, values: x })
}

fn lin(v: &[f64], y: f64) -> f64 {
    let i = (y.floor() as usize).min(v.len() - 2);
    let w = y - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}

/// Defect of r + r*k - k at the given nodes, with the convolution recomputed
/// cell by cell by adaptive quadrature of the interpolants.
pub fn fresh_resolvent_defect(table: &ResolventTable, nodes: &[usize]) -> Result<f64> {
    let k = &table.kernel;
    let g = k.gamma;
    let mut worst = 0.0f64;
    for &j in nodes {
        if j == 0 || j > k.n() {
            continue;
        }
        let jf = j as f64;
        let mut s = 0.0;
        for m in 0..j {
            let mf = m as f64;
            let h = |y: f64| lin(&k.a, jf - y) * lin(&table.b, y);
            let v = if j == 1 {
                let hh = |y: f64| (1.0 - y).powf(g - 1.0) * h(y);
                quad::integrate_left_singular(hh, 0.0, 0.5, g, 1e-15, 1e-13)?
                    + quad::integrate_right_singular(|y| y.powf(g - 1.0) * h(y), 0.5, 1.0, g, 1e-15, 1e-13)?
            } else if m == 0 {
                quad::integrate_left_singular(|y| (jf - y).powf(g - 1.0) * h(y), 0.0, 1.0, g, 1e-15, 1e-13)?
            } else if m == j - 1 {
                quad::integrate_right_singular(|y| y.powf(g - 1.0) * h(y), mf, mf + 1.0, g, 1e-15, 1e-13)?
            } else {
                quad::integrate(|y| (jf - y).powf(g - 1.0) * y.powf(g - 1.0) * h(y), mf, mf + 1.0, 1e-15, 1e-13)?
            };
            s += v;
        }
        let d = (table.b[j] + k.dt.powf(g) * jf.powf(1.0 - g) * s - k.a[j]).abs();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Defect of x + k*x - f at the given nodes, recomputed by quadrature of the
/// interpolants.
pub fn fresh_vie_defect(k: &KernelGrid, x: &GridFn, f: &GridFn, nodes: &[usize]) -> Result<f64> {
    let g = k.gamma;
    let mut worst = 0.0f64;
    for &j in nodes {
        if j > x.n() {
            continue;
        }
        let jf = j as f64;
        let mut s = 0.0;
        for m in 0..j {
            let mf = m as f64;
            // lag variable u = j - y
            let h = |y: f64| lin(&k.a, jf - y) * lin(&x.values, y);
            s += if m == j - 1 {
                quad::integrate_right_singular(h, mf, mf + 1.0, g, 1e-15, 1e-13)?
            } else {
                quad::integrate(|y| (jf - y).powf(g - 1.0) * h(y), mf, mf + 1.0, 1e-15, 1e-13)?
            };
        }
        let d = (x.values[j] + k.dt.powf(g) * s - f.values[j]).abs();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Exact cell integrals of kappa against the two hat pieces.
///
/// For lag cell k (u in [(k-1)dt, k dt]) returns
/// `(int kappa(u) (k - u/dt) du, int kappa(u) (u/dt - k + 1) du)`,
/// the weights on the newer and the older node.
#[derive(Debug, Clone)]
pub struct KappaWeights {
    pub dt: f64,
    newer: Vec<f64>,
    older: Vec<f64>,
    layer: Vec<[f64; 2]>,
}

impl KappaWeights {
    pub fn new(spec: &KernelSpec, dt: f64, n: usize) -> Result<Self> {
        if spec.kind != KernelKind::MittagLeffler {
            return Err(VlxError::param("kind", "kappa weights need the Mittag-Leffler kernel"));
        }
        let a = spec.alpha;
        let c = spec.rate();
        let eps = spec.epsilon;
        let mut newer = Vec::with_capacity(n);
        let mut older = Vec::with_capacity(n);
        // first cell in closed form
        let z = -c * dt.powf(a);
        let p0 = dt.powf(a) * ml(a, a + 1.0, z)? / eps;
        let p1 = dt.powf(a) * (ml(a, a + 1.0, z)? - ml(a, a + 2.0, z)?) / eps;
        newer.push(p0 - p1);
        older.push(p1);
        let top = ml_cdf(a, c, dt)?;
        let phi = |x: f64| ml_cdf(a, c, x).map(|m| m / top);
        let mut layer = Vec::with_capacity(n);
        let mut first = [0.0; 2];
        for (p, slot) in first.iter_mut().enumerate() {
            *slot = quad::integrate_right_singular(
                |x| ml(a, a, -c * (dt - x).powf(a)).unwrap_or(f64::NAN) * phi(x).unwrap_or(f64::NAN).powi(p as i32 + 1) / eps,
                0.0,
                dt,
                a,
                1e-300,
                1e-13,
            )?;
        }
        layer.push(first);
        let rule = GaussRule::legendre(8);
        let modified = layer_node_weights(&rule, dt, &phi)?;
        for k in 2..=n {
            let lo = (k - 1) as f64 * dt;
            let mut w_new = 0.0;
            let mut w_old = 0.0;
            let mut m = [0.0; 2];
            for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                let u = lo + x * dt;
                let kv = u.powf(a - 1.0) * ml(a, a, -c * u.powf(a))? / eps;
                w_new += w * kv * (1.0 - x);
                w_old += w * kv * x;
                m[0] += modified[i][0] * kv;
                m[1] += modified[i][1] * kv;
            }
            newer.push(w_new * dt);
            older.push(w_old * dt);
            layer.push([m[0] * dt, m[1] * dt]);
        }
        Ok(KappaWeights { dt, newer, older, layer })
    }

    /// Moments for a cell that starts at a jump of the forcing, where psi is
    /// interpolated along phi(x) = M(x) / M(dt), M being the distribution
    /// function of kappa: int over lag cell k of kappa(u) phi(k dt - u)^p du
    /// for p = 1, 2.
    pub fn layer(&self, k: usize) -> [f64; 2] {
        self.layer[k - 1]
    }

    pub fn newer(&self, k: usize) -> f64 {
        self.newer[k - 1]
    }

    pub fn older(&self, k: usize) -> f64 {
        self.older[k - 1]
    }

    pub fn len(&self) -> usize {
        self.newer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.newer.is_empty()
    }
}

/// int_0^1 l_i(y) phi(dt (1 - y))^p dy for the Lagrange basis l_i on the
/// rule's nodes, so that a smooth kernel sampled at the nodes integrates
/// against phi^p. With 1 - y = v^2 the integrand behaves like v^(2a+1).
fn layer_node_weights(rule: &GaussRule, dt: f64, phi: &dyn Fn(f64) -> Result<f64>) -> Result<Vec<[f64; 2]>> {
    let fine = GaussRule::legendre(40);
    let xs = &rule.nodes;
    let mut out = vec![[0.0; 2]; xs.len()];
    for (v, w) in fine.nodes.iter().zip(&fine.weights) {
        let y = 1.0 - v * v;
        let f = phi(dt * v * v)?;
        let jac = w * 2.0 * v;
        for (i, o) in out.iter_mut().enumerate() {
            let mut l = 1.0;
            for (m, xm) in xs.iter().enumerate() {
                if m != i {
                    l *= (y - xm) / (xs[i] - xm);
                }
            }
            o[0] += jac * l * f;
            o[1] += jac * l * f * f;
        }
    }
    Ok(out)
}

/// Solves x + c (kappa * x) = f with exact kappa cell weights, which avoids
/// interpolating the t^alpha cusp of the Mittag-Leffler factor.
pub fn linear_vie_solve_kappa(spec: &KernelSpec, c: f64, f: &GridFn) -> Result<GridFn> {
    let n = f.n();
    let w = KappaWeights::new(spec, f.dt, n)?;
    let mut x = vec![0.0; n + 1];
    x[0] = f.values[0];
    for j in 1..=n {
        let mut s = c * w.older(1) * x[j - 1];
        for k in 2..=j {
            s += c * (w.newer(k) * x[j - k + 1] + w.older(k) * x[j - k]);
        }
        x[j] = (f.values[j] - s) / (1.0 + c * w.newer(1));
        if !x[j].is_finite() {
            return Err(VlxError::Instability(format!("linear VIE overflow at node {j}")));
        }
    }
    Ok(GridFn { dt: f.dt, values: x })
}
