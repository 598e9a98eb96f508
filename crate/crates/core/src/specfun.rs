//! Gamma wrappers, the two-parameter Mittag-Leffler function on the real line,
//! and fractional integrals of grid-sampled functions.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma as sgamma, ln_gamma};

use crate::error::{Result, VlxError};
use crate::quad;

pub fn gamma(x: f64) -> f64 {
    sgamma(x)
}

/// 1/Gamma(x), zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 171.0 {
        return (-ln_gamma(x)).exp();
    }
    1.0 / sgamma(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(VlxError::param("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(VlxError::param("beta", format!("must be positive, got {beta}")));
        }
        Ok(MlParams { alpha, beta })
    }
}

/// E_{alpha,beta}(z) for real z.
///
/// Power series for z >= -1. For z < -1 the series cancels badly, so beta is
/// first reduced to (0, 1] with E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z
/// and the real-line integral representation is used (alpha < 1), or the
/// incomplete-gamma form for alpha = 1.
pub fn mittag_leffler(p: MlParams, z: f64) -> Result<f64> {
    let MlParams { alpha, beta } = p;
    if z.is_nan() {
        return Err(VlxError::Evaluation { z, regime: "nan argument" });
    }
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    if alpha == 1.0 && beta == 1.0 {
        return Ok(z.exp());
    }
    if z >= -1.0 {
        return series(alpha, beta, z);
    }
    if z == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if alpha == 1.0 {
        return neg_alpha_one(beta, z);
    }
    if beta > 1.0 {
        let lower = mittag_leffler(MlParams { alpha, beta: beta - alpha }, z)?;
        return Ok((lower - rgamma(beta - alpha)) / z);
    }
    integral_rep(alpha, beta, z)
}

/// Shorthand for `mittag_leffler` with unchecked parameters.
pub fn ml(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    mittag_leffler(MlParams::new(alpha, beta)?, z)
}

fn series(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let lz = z.abs().ln();
    for k in 0..5000usize {
        let arg = alpha * k as f64 + beta;
        let term = if arg < 160.0 {
            z.powi(k as i32) * rgamma(arg)
        } else {
            let sign = if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            sign * (k as f64 * lz - ln_gamma(arg)).exp()
        };
        if !term.is_finite() {
            return Err(VlxError::Evaluation { z, regime: "power series overflow" });
        }
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        // past the largest term and negligible
        if k > 2 && arg > 1.0 && term.abs() <= 1e-17 * (sum + comp).abs().max(1e-300) {
            let next = alpha * (k + 1) as f64 + beta;
            if lz < ln_gamma(next) - ln_gamma(arg) {
                return Ok(sum + comp);
            }
        }
    }
    Err(VlxError::Evaluation { z, regime: "power series did not converge" })
}

// alpha = 1, z < -1.
fn neg_alpha_one(beta: f64, z: f64) -> Result<f64> {
    if beta == 1.0 {
        return Ok(z.exp());
    }
    if beta < 1.0 {
        let up = neg_alpha_one(beta + 1.0, z)?;
        return Ok(rgamma(beta) + z * up);
    }
    // E_{1,b}(z) = (1/Gamma(b-1)) int_0^1 (1-t)^(b-2) e^(zt) dt, b > 1
    let v = quad::integrate_right_singular(|t: f64| (z * t).exp(), 0.0, 1.0, beta - 1.0, 1e-300, 1e-14)
        .map_err(|_| VlxError::Evaluation { z, regime: "alpha = 1 integral" })?;
    Ok(v * rgamma(beta - 1.0))
}

// 0 < alpha < 1, 0 < beta <= 1, z < 0.
//
// Hankel contour made of the rays arg = +-delta. Any delta in (alpha pi / 2,
// alpha pi] works; delta = alpha pi gives the usual real integrand, but as
// alpha -> 1 the pole at z sits next to the ray, so the angle is capped at 3pi/4.
fn integral_rep(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    let az = -z;
    let delta = (alpha * PI).min(0.75 * PI);
    let omega = delta / alpha;
    let (so, co) = omega.sin_cos();
    let (sd, cd) = delta.sin_cos();
    let pw = (1.0 - beta) / alpha;
    let inv_a = 1.0 / alpha;
    let c = 1.0 / (alpha * PI);
    let k = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let a = r.powf(inv_a);
        let th = a * so + delta * (pw + 1.0);
        let (st, ct) = th.sin_cos();
        let re = r * cd + az;
        let im = r * sd;
        let den = r * r + 2.0 * r * az * cd + az * az;
        c * r.powf(pw) * (a * co).exp() * (re * st - im * ct) / den
    };
    let upper = (40.0 / -co).powf(alpha);
    let mut breaks = vec![0.0, upper.min(1.0), upper];
    if cd < 0.0 {
        let peak = -az * cd;
        let width = az * sd;
        for b in [peak - width, peak, peak + width] {
            if b > 0.0 && b < upper {
                breaks.push(b);
            }
        }
    } else if az < upper {
        breaks.push(az);
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    quad::integrate_pieces(k, &breaks, 1e-300, 1e-13)
        .map_err(|_| VlxError::Evaluation { z, regime: "integral representation" })
}

/// Uniform-grid samples with node k at t = k * dt.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl GridFn {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(VlxError::param("dt", format!("must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(VlxError::param("values", "grid needs at least one node"));
        }
        Ok(GridFn { dt, values })
    }

    /// Samples `f` on `n + 1` nodes of `[0, n dt]`.
    pub fn sample<F: Fn(f64) -> f64>(dt: f64, n: usize, f: F) -> Self {
        GridFn { dt, values: (0..=n).map(|k| f(k as f64 * dt)).collect() }
    }

    /// Number of steps (nodes minus one).
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.t(k)).collect()
    }

    /// Piecewise-linear interpolation, clamped to the grid.
    pub fn interp(&self, t: f64) -> f64 {
        let n = self.n();
        if n == 0 || t <= 0.0 {
            return self.values[0];
        }
        let x = t / self.dt;
        if x >= n as f64 {
            return self.values[n];
        }
        let i = x.floor() as usize;
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Product-integration weights for (1/Gamma(g)) int (t_n - s)^(g-1) x(s) ds
/// with x piecewise linear between nodes.
///
/// For the cell at lag k (covering u = (t_n - s)/dt in [k-1, k]) the weight on
/// the older node is `left(k)` and on the newer node `right(k)`.
#[derive(Debug, Clone)]
pub struct FracWeights {
    pub order: f64,
    pub dt: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl FracWeights {
    pub fn new(order: f64, dt: f64, n: usize) -> Result<Self> {
        if !(order > 0.0 && order.is_finite()) {
            return Err(VlxError::param("order", format!("must be positive, got {order}")));
        }
        if !(dt > 0.0) {
            return Err(VlxError::param("dt", format!("must be positive, got {dt}")));
        }
        let scale = dt.powf(order) * rgamma(order);
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for k in 1..=n {
            let (l, r) = unit_cell_moments(order, k);
            left.push(l * scale);
            right.push(r * scale);
        }
        Ok(FracWeights { order, dt, left, right })
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn left(&self, k: usize) -> f64 {
        self.left[k - 1]
    }

    pub fn right(&self, k: usize) -> f64 {
        self.right[k - 1]
    }

    /// Weight of the newest node at step n (the implicit coefficient).
    pub fn diag(&self) -> f64 {
        self.right[0]
    }

    /// Sum over cells 1..=n of the history part, excluding the newest node.
    pub fn history(&self, x: &[f64], n: usize) -> f64 {
        let mut s = 0.0;
        for c in 1..=n {
            let k = n - c + 1;
            s += self.left(k) * x[c - 1];
            if c < n {
                s += self.right(k) * x[c];
            }
        }
        s
    }

    /// Full discrete integral at node n.
    pub fn apply(&self, x: &[f64], n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.history(x, n) + self.diag() * x[n]
    }
}

/// Moments of u^(g-1) against the two hat pieces on [k-1, k].
/// Returns (int (u-k+1) u^(g-1) du, int (k-u) u^(g-1) du).
pub(crate) fn unit_cell_moments(g: f64, k: usize) -> (f64, f64) {
    let m = (k - 1) as f64;
    if m >= 8.0 {
        // binomial series of (m + v)^(g-1) in v/m
        let mut coef = 1.0;
        let mut sl = 0.0;
        let mut sr = 0.0;
        for j in 0..60 {
            let jf = j as f64;
            let tl = coef / (jf + 2.0);
            let tr = coef / ((jf + 1.0) * (jf + 2.0));
            sl += tl;
            sr += tr;
            if tl.abs() < 1e-18 * sl.abs() {
                break;
            }
            coef *= (g - 1.0 - jf) / ((jf + 1.0) * m);
        }
        let base = m.powf(g - 1.0);
        return (base * sl, base * sr);
    }
    let kf = k as f64;
    let a = (kf.powf(g) - m.powf(g)) / g;
    let b = (kf.powf(g + 1.0) - m.powf(g + 1.0)) / (g + 1.0);
    (b - m * a, kf * a - b)
}

/// Samples of I^order f at the grid nodes.
pub fn fractional_integral(order: f64, f: &GridFn) -> Result<GridFn> {
    let n = f.n();
    let w = FracWeights::new(order, f.dt, n)?;
    let values = (0..=n).map(|k| w.apply(&f.values, k)).collect();
    Ok(GridFn { dt: f.dt, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_cell_moments() {
        let g = 0.7;
        let (l, r) = unit_cell_moments(g, 1);
        assert!((l - 1.0 / (g + 1.0)).abs() < 1e-15);
        assert!((r - 1.0 / (g * (g + 1.0))).abs() < 1e-15);
    }

    #[test]
    fn series_and_direct_moments_agree() {
        for &g in &[0.05, 0.3, 0.7, 1.0] {
            for k in 9..12 {
                let (l, r) = unit_cell_moments(g, k);
                let kf = k as f64;
                let m = kf - 1.0;
                let a = (kf.powf(g) - m.powf(g)) / g;
                let b = (kf.powf(g + 1.0) - m.powf(g + 1.0)) / (g + 1.0);
                assert!((l - (b - m * a)).abs() < 1e-12 * l.abs());
                assert!((r - (kf * a - b)).abs() < 1e-12 * r.abs());
            }
        }
    }

    #[test]
    fn rgamma_poles() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        assert!((rgamma(1.0) - 1.0).abs() < 1e-15);
    }
}
