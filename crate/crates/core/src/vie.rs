//! Riccati-Volterra solvers and mgf assembly.
//!
//! The model equation is
//! `eps psi(t) = int_0^t K(t-s) (f(s) - lambda psi(s) + Gbar(psi(s))) ds`
//! with K the power kernel. Two discretisations are provided:
//!
//! * [`Scheme::Adams`] works on this form directly: rectangle predictor and a
//!   product-trapezoid corrector solved by safeguarded Newton.
//! * [`Scheme::Kappa`] uses the equivalent form `psi = kappa * (f + Gbar(psi))`
//!   with exact cell integrals of the Mittag-Leffler kernel, so the stiff
//!   linear part is integrated exactly. Needs lambda > 0 and alpha > 1/2.
//!
//! Forcings are right-continuous step functions whose jumps sit on grid nodes.

use crate::error::{Result, VlxError};
use crate::kernels::{KappaWeights, KernelSpec};
use crate::levy::{self, tail_sums, Curve, LevyMeasureSpec, RiccatiCoeffs};
use crate::quad::KahanSum;
use crate::specfun::{fractional_integral, gamma, FracWeights, GridFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Kappa when lambda > 0 and alpha > 1/2, Adams otherwise.
    Auto,
    Adams,
    Kappa,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Auto => "auto",
            Scheme::Adams => "adams",
            Scheme::Kappa => "kappa",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Scheme::Auto),
            "adams" => Ok(Scheme::Adams),
            "kappa" => Ok(Scheme::Kappa),
            _ => Err(VlxError::Config(format!("unknown scheme `{s}` (expected auto, adams or kappa)"))),
        }
    }
}

/// Right-continuous step function: `values[i]` on `[breaks[i], breaks[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl Forcing {
    pub fn steps(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(VlxError::param("forcing", "need matching non-empty break and value lists"));
        }
        if breaks[0] != 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(VlxError::param("forcing", "breaks must start at 0 and increase"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VlxError::param("forcing", "values must be finite"));
        }
        Ok(Forcing { breaks, values })
    }

    pub fn constant(c: f64) -> Self {
        Forcing { breaks: vec![0.0], values: vec![c] }
    }

    /// f(s) = -(1{s < 1/2} + 1{s <= 1})/2 on [0, 1].
    pub fn figure1() -> Self {
        Forcing { breaks: vec![0.0, 0.5], values: vec![-1.0, -0.5] }
    }

    /// Forcing with f(T - s) = u_i + ... + u_n on (s_{i-1}, s_i] and 0 for s > s_n.
    pub fn fdd(horizon: f64, times: &[f64], u: &[f64]) -> Result<Self> {
        if times.is_empty() || times.len() != u.len() {
            return Err(VlxError::param("times", "need matching non-empty times and weights"));
        }
        if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) || times[times.len() - 1] > horizon {
            return Err(VlxError::param("times", "must be increasing in (0, T]"));
        }
        if u.iter().any(|x| !(*x <= 0.0)) {
            return Err(VlxError::param("u", "weights must be non-positive"));
        }
        let sums = tail_sums(u);
        let n = times.len();
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        let first = horizon - times[n - 1];
        if first > 0.0 {
            breaks.push(0.0);
            values.push(0.0);
        }
        for i in (0..n).rev() {
            let b = horizon - times[i];
            if b == 0.0 && !breaks.is_empty() {
                continue;
            }
            breaks.push(b);
            values.push(sums[i]);
        }
        if breaks[0] != 0.0 {
            breaks.insert(0, 0.0);
            values.insert(0, 0.0);
        }
        Forcing::steps(breaks, values)
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|b| *b <= t);
        self.values[i.max(1) - 1]
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_nonpositive(&self) -> bool {
        self.values.iter().all(|v| *v <= 0.0)
    }

    pub fn jumps(&self) -> &[f64] {
        &self.breaks[1..]
    }

    /// Cell values: f on (t_{c-1}, t_c) for c = 1..=n.
    fn cells(&self, dt: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|c| self.value((c as f64 - 0.5) * dt)).collect()
    }
}

/// Smallest n' >= n for which every jump of the forcing lands on a node.
pub fn aligned_steps(horizon: f64, n: usize, forcing: &Forcing) -> Result<usize> {
    let on_grid = |m: usize| {
        forcing.jumps().iter().filter(|b| **b < horizon).all(|b| {
            let k = b / horizon * m as f64;
            (k - k.round()).abs() < 1e-9 * (1.0 + k)
        })
    };
    for m in n..=n.saturating_mul(64).max(n + 1) {
        if on_grid(m) {
            return Ok(m);
        }
    }
    Err(VlxError::Config(format!("no grid with at most {} steps puts every forcing jump on a node", n * 64)))
}

/// One instance of the Riccati-Volterra equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiProblem {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub measure: LevyMeasureSpec,
    pub forcing: Forcing,
    pub horizon: f64,
    pub n_steps: usize,
    pub scheme: Scheme,
    pub tol: f64,
}

impl RiccatiProblem {
    /// Builds and validates a problem; `n_steps` is raised if needed so that
    /// the forcing jumps fall on nodes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        lambda: f64,
        epsilon: f64,
        sigma: f64,
        measure: LevyMeasureSpec,
        forcing: Forcing,
        horizon: f64,
        n_steps: usize,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(VlxError::param("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(VlxError::param("lambda", format!("must be non-negative, got {lambda}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(VlxError::param("epsilon", format!("must be positive, got {epsilon}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(VlxError::param("sigma", format!("must be non-negative, got {sigma}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(VlxError::param("T", format!("must be positive, got {horizon}")));
        }
        if n_steps < 16 {
            return Err(VlxError::param("n_steps", format!("need at least 16 steps, got {n_steps}")));
        }
        if !forcing.is_nonpositive() {
            return Err(VlxError::param("forcing", "must be non-positive"));
        }
        let n_steps = aligned_steps(horizon, n_steps, &forcing)?;
        Ok(RiccatiProblem {
            alpha,
            lambda,
            epsilon,
            sigma,
            measure,
            forcing,
            horizon,
            n_steps,
            scheme: Scheme::Auto,
            tol: 1e-9,
        })
    }

    /// The instance of Figure 1 at a given eps.
    pub fn figure1(epsilon: f64, n_steps: usize) -> Result<Self> {
        Self::new(
            0.7,
            1.0,
            epsilon,
            0.4,
            LevyMeasureSpec::cgmy(1.0, 3.0, 1.5)?,
            Forcing::figure1(),
            1.0,
            n_steps,
        )
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn resolved_scheme(&self) -> Scheme {
        match self.scheme {
            Scheme::Auto if self.lambda > 0.0 && self.alpha > 0.5 => Scheme::Kappa,
            Scheme::Auto => Scheme::Adams,
            s => s,
        }
    }

    /// kappa_eps of this problem, when it exists.
    pub fn kappa(&self) -> Result<KernelSpec> {
        KernelSpec::mittag_leffler(self.alpha, self.lambda, self.epsilon)
    }

    /// Gbar(w) for w <= 0, continued by sigma^2 w^2 / 2 for w > 0 (the jump
    /// part is dropped there, as in the existence argument).
    fn gbar(&self, w: f64) -> Result<f64> {
        let jump = if w > 0.0 { 0.0 } else { levy::v1(&self.measure, w)? };
        Ok(0.5 * self.sigma * self.sigma * w * w + jump)
    }

    fn gbar_prime(&self, w: f64) -> Result<f64> {
        let jump = if w > 0.0 { 0.0 } else { levy::v1_prime(&self.measure, w)? };
        Ok(self.sigma * self.sigma * w + jump)
    }
}

/// Sampled solution with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub grid: GridFn,
    pub scheme: Scheme,
    pub max_defect: f64,
    /// node where `max_defect` is attained
    pub defect_node: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl SolutionPath {
    pub fn values(&self) -> &[f64] {
        &self.grid.values
    }

    pub fn last(&self) -> f64 {
        *self.grid.values.last().unwrap()
    }
}

fn check_finite(v: f64, node: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(VlxError::Instability(format!("non-finite value at node {node}")))
    }
}

/// Root of the increasing map w -> a w - d N(w) - r with N' <= 0 on w <= 0.
fn implicit_step<N, D>(a: f64, d: f64, r: f64, guess: f64, n_fn: N, dn: D) -> Result<f64>
where
    N: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    let g = |w: f64| -> Result<f64> { Ok(a * w - d * n_fn(w)? - r) };
    // bracket the root
    let g0 = g(0.0)?;
    let (mut lo, mut hi) = if g0 >= 0.0 {
        let mut lo = -(1.0f64).max(r.abs() / a);
        let mut k = 0;
        while g(lo)? > 0.0 {
            lo *= 2.0;
            k += 1;
            if k > 200 {
                return Err(VlxError::Instability("implicit step: no lower bracket".into()));
            }
        }
        (lo, 0.0)
    } else {
        let mut hi = (r.abs() / a).max(1e-300);
        let mut k = 0;
        while g(hi)? < 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 200 {
                return Err(VlxError::Instability("implicit step: no upper bracket".into()));
            }
        }
        (0.0, hi)
    };
    let mut w = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..100 {
        let v = g(w)?;
        if v == 0.0 {
            return Ok(w);
        }
        if v > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let slope = a - d * dn(w)?;
        let mut next = w - v / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-15 * (1.0 + w.abs()) {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

/// Integral of the step forcing against the power kernel over lag cell k.
fn power_cell_masses(alpha: f64, dt: f64, n: usize) -> Vec<f64> {
    let s = dt.powf(alpha) / gamma(alpha + 1.0);
    (1..=n).map(|k| s * ((k as f64).powf(alpha) - ((k - 1) as f64).powf(alpha))).collect()
}

/// Cells that start where f jumps (including t = 0). Linear interpolation
/// across such a cell misses the boundary layer of psi, so these cells get
/// their own weights.
fn jump_cells(forcing: &Forcing, dt: f64, n: usize) -> Vec<bool> {
    let mut jump = vec![false; n + 1];
    jump[1] = true;
    for b in forcing.jumps() {
        let k = (b / dt).round() as usize;
        if k + 1 <= n {
            jump[k + 1] = true;
        }
    }
    jump
}

/// Cell weights at lag k: on N(psi_{c-1}), on N(psi_c), and on the slope
/// term N'(psi_{c-1}) (psi_c - psi_{c-1}) used on jump cells.
struct CellWeights<'a> {
    older: &'a dyn Fn(usize) -> f64,
    newer: &'a dyn Fn(usize) -> f64,
    jump: Vec<bool>,
    /// layer moments by lag; without them the whole mass of a jump cell goes
    /// to its right end (rectangle rule)
    layer: Option<Vec<[f64; 2]>>,
}

impl CellWeights<'_> {
    /// (older, newer, slope) weights for cell c at step j.
    fn at(&self, c: usize, j: usize) -> (f64, f64, f64) {
        let k = j - c + 1;
        if !self.jump[c] {
            return ((self.older)(k), (self.newer)(k), 0.0);
        }
        let total = (self.older)(k) + (self.newer)(k);
        match &self.layer {
            // N along the cell as N0 + b phi + (N1 - N0 - b) phi^2 with b the slope term
            Some(l) => {
                let [m1, m2] = l[k - 1];
                ((total - m2).max(0.0), m2, (m1 - m2).max(0.0))
            }
            None => (0.0, total, 0.0),
        }
    }
}

struct March {
    psi: Vec<f64>,
    defect: f64,
    defect_node: usize,
}

/// Steps a psi_j = F_j + sum_c (wo N(psi_{c-1}) + wn N(psi_c)), implicit in psi_j.
fn march<N, D>(
    a: f64,
    fpart: &[f64],
    w: &CellWeights,
    predictor: Option<&[f64]>,
    nfun: N,
    dnfun: D,
) -> Result<March>
where
    N: Fn(f64) -> Result<f64> + Copy,
    D: Fn(f64) -> Result<f64> + Copy,
{
    let n = fpart.len() - 1;
    let mut psi = vec![0.0; n + 1];
    let mut nv = vec![0.0; n + 1];
    // slope terms N'(psi_{c-1}) (psi_c - psi_{c-1}), nonzero on jump cells only
    let mut sv = vec![0.0; n + 1];
    nv[0] = nfun(0.0)?;
    for j in 1..=n {
        let mut hist = 0.0;
        for c in 1..=j {
            let (wo, wn, ws) = w.at(c, j);
            hist += wo * nv[c - 1];
            if c < j {
                hist += wn * nv[c] + ws * sv[c];
            }
        }
        let (_, diag, ws) = w.at(j, j);
        // the slope term is linear in psi_j; N' <= 0 keeps the map increasing
        let dprev = if ws > 0.0 { dnfun(psi[j - 1])? } else { 0.0 };
        let a_eff = a - ws * dprev;
        let r = fpart[j] + hist - ws * dprev * psi[j - 1];
        let guess = match predictor {
            Some(mass) => {
                let pred: f64 = (1..=j).map(|c| nv[c - 1] * mass[j - c]).sum();
                (fpart[j] + pred) / a
            }
            None => psi[j - 1],
        };
        let x = implicit_step(a_eff, diag, r, guess, nfun, dnfun)?;
        psi[j] = check_finite(x, j)?;
        nv[j] = check_finite(nfun(x)?, j)?;
        sv[j] = dprev * (psi[j] - psi[j - 1]);
    }
    // second pass over the finished path, newest cell first, compensated
    let mut defect = 0.0f64;
    let mut defect_node = 0;
    for j in 1..=n {
        let mut s = KahanSum::default();
        for c in (1..=j).rev() {
            let (wo, wn, ws) = w.at(c, j);
            s.add(wo * nv[c - 1] + wn * nv[c] + ws * sv[c]);
        }
        let d = (a * psi[j] - fpart[j] - s.value()).abs() / a;
        if d > defect {
            defect = d;
            defect_node = j;
        }
    }
    Ok(March { psi, defect, defect_node })
}

fn forcing_part(fc: &[f64], mass: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = fc.len();
    let mut out = vec![0.0; n + 1];
    for (j, o) in out.iter_mut().enumerate().skip(1) {
        let mut s = KahanSum::default();
        for c in 1..=j {
            s.add(fc[c - 1] * mass(j - c + 1));
        }
        *o = s.value();
    }
    out
}

fn adams_solve_inner(p: &RiccatiProblem) -> Result<SolutionPath> {
    let n = p.n_steps;
    let dt = p.dt();
    let fc = p.forcing.cells(dt, n);
    let mass = power_cell_masses(p.alpha, dt, n);
    let fpart = forcing_part(&fc, |k| mass[k - 1]);
    let fw = FracWeights::new(p.alpha, dt, n)?;
    let older = |k: usize| fw.left(k);
    let newer = |k: usize| fw.right(k);
    let w = CellWeights { older: &older, newer: &newer, jump: jump_cells(&p.forcing, dt, n), layer: None };
    let nl = |w: f64| -> Result<f64> { Ok(-p.lambda * w + p.gbar(w)?) };
    let dnl = |w: f64| -> Result<f64> { Ok(-p.lambda + p.gbar_prime(w)?) };
    let m = march(p.epsilon, &fpart, &w, Some(&mass), nl, dnl)?;
    Ok(SolutionPath {
        grid: GridFn { dt, values: m.psi },
        scheme: Scheme::Adams,
        max_defect: m.defect,
        defect_node: m.defect_node,
        alpha: p.alpha,
        lambda: p.lambda,
        epsilon: p.epsilon,
    })
}

fn kappa_solve_inner(p: &RiccatiProblem) -> Result<SolutionPath> {
    let spec = p.kappa()?;
    let n = p.n_steps;
    let dt = p.dt();
    let kw = KappaWeights::new(&spec, dt, n)?;
    let fc = p.forcing.cells(dt, n);
    let fpart = forcing_part(&fc, |k| kw.newer(k) + kw.older(k));
    let older = |k: usize| kw.older(k);
    let newer = |k: usize| kw.newer(k);
    let layer = (1..=n).map(|k| kw.layer(k)).collect();
    let w = CellWeights { older: &older, newer: &newer, jump: jump_cells(&p.forcing, dt, n), layer: Some(layer) };
    let g = |x: f64| p.gbar(x);
    let dg = |x: f64| p.gbar_prime(x);
    let m = march(1.0, &fpart, &w, None, g, dg)?;
    Ok(SolutionPath {
        grid: GridFn { dt, values: m.psi },
        scheme: Scheme::Kappa,
        max_defect: m.defect,
        defect_node: m.defect_node,
        alpha: p.alpha,
        lambda: p.lambda,
        epsilon: p.epsilon,
    })
}

/// Solves the Riccati-Volterra problem with the selected scheme.
pub fn adams_solve(problem: &RiccatiProblem) -> Result<SolutionPath> {
    let path = match problem.resolved_scheme() {
        Scheme::Kappa => kappa_solve_inner(problem)?,
        _ => adams_solve_inner(problem)?,
    };
    if path.max_defect > problem.tol {
        return Err(VlxError::Defect {
            defect: path.max_defect,
            tol: problem.tol,
            node: path.defect_node,
            t: path.grid.t(path.defect_node),
        });
    }
    Ok(path)
}

/// (kappa_eps * f)(t) for the step forcing, from the closed-form distribution function.
pub fn kappa_forcing(problem: &RiccatiProblem, t: f64) -> Result<f64> {
    let spec = problem.kappa()?;
    let c = spec.rate();
    let cdf = |x: f64| crate::kernels::ml_cdf(spec.alpha, c, x.max(0.0));
    let f = &problem.forcing;
    let mut s = 0.0;
    for i in 0..f.breaks.len() {
        let a = f.breaks[i];
        if a >= t {
            break;
        }
        let b = f.breaks.get(i + 1).cloned().unwrap_or(f64::INFINITY).min(t);
        s += f.values[i] * (cdf(t - a)? - cdf(t - b)?);
    }
    Ok(s / problem.lambda)
}

/// Checks of the a-priori bounds on a solved path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    /// max_n psi_n (should be <= 0)
    pub max_value: f64,
    /// min_n (psi_n - (kappa * f)(t_n)), when kappa exists
    pub lower_gap: Option<f64>,
    /// max_n |psi_n|
    pub sup_norm: f64,
    /// ||f||_inf / lambda
    pub sup_bound: f64,
}

impl BoundsReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_value <= tol && self.lower_gap.is_none_or(|g| g >= -tol) && self.sup_norm <= self.sup_bound + tol
    }
}

pub fn bounds_report(problem: &RiccatiProblem, path: &SolutionPath) -> Result<BoundsReport> {
    let v = path.values();
    let max_value = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sup_norm = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let sup_bound = if problem.lambda > 0.0 { problem.forcing.sup_abs() / problem.lambda } else { f64::INFINITY };
    let lower_gap = if problem.lambda > 0.0 && problem.alpha > 0.5 {
        let mut g = f64::INFINITY;
        for (j, x) in v.iter().enumerate().skip(1) {
            g = g.min(x - kappa_forcing(problem, path.grid.t(j))?);
        }
        Some(g)
    } else {
        None
    };
    Ok(BoundsReport { max_value, lower_gap, sup_norm, sup_bound })
}

/// psi_0(t) = Lambda^{-1}(-f(t)) sampled on the problem grid.
pub fn psi0_path(problem: &RiccatiProblem) -> Result<GridFn> {
    let n = problem.n_steps;
    let dt = problem.dt();
    let mut v = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let f = problem.forcing.value(j as f64 * dt);
        v.push(levy::psi0_solve(f, problem.lambda, problem.sigma, &problem.measure)?);
    }
    Ok(GridFn { dt, values: v })
}

/// L1(0, T) distance of two paths on the same grid, with psi0 treated as a
/// step function on cells (value at the cell midpoint).
pub fn l1_gap(problem: &RiccatiProblem, path: &SolutionPath) -> Result<(f64, f64)> {
    let n = problem.n_steps;
    let dt = problem.dt();
    let mut cache: Vec<(f64, f64)> = Vec::new();
    let mut psi0_at = |f: f64| -> Result<f64> {
        if let Some((_, v)) = cache.iter().find(|(k, _)| *k == f) {
            return Ok(*v);
        }
        let v = levy::psi0_solve(f, problem.lambda, problem.sigma, &problem.measure)?;
        cache.push((f, v));
        Ok(v)
    };
    let mut gap = 0.0;
    let mut norm = 0.0;
    let v = path.values();
    for c in 1..=n {
        let z = psi0_at(problem.forcing.value((c as f64 - 0.5) * dt))?;
        // psi is linear on the cell; integrate |psi - z| exactly
        let (a, b) = (v[c - 1] - z, v[c] - z);
        gap += if a * b >= 0.0 {
            0.5 * dt * (a.abs() + b.abs())
        } else {
            0.5 * dt * (a * a + b * b) / (a.abs() + b.abs())
        };
        norm += dt * z.abs();
    }
    Ok((gap, norm))
}

/// Maps the Prop 1.1 equation for phi_eps onto a Riccati problem.
pub fn prop11_problem(c: &RiccatiCoeffs, epsilon: f64, alpha: f64, horizon: f64, n_steps: usize) -> Result<RiccatiProblem> {
    c.validate()?;
    if !(epsilon > 0.0) {
        return Err(VlxError::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    let p = c.p;
    let lam = (c.lambda - c.rho * p * c.nu) / epsilon;
    let sig = c.nu / epsilon;
    RiccatiProblem::new(
        alpha,
        lam,
        1.0,
        sig,
        LevyMeasureSpec::None,
        Forcing::constant(0.5 * (p * p - p)),
        horizon,
        n_steps,
    )
}

/// phi_eps = I^alpha((p^2-p)/2 + (rho p nu - lambda) phi/eps + nu^2 phi^2/(2 eps^2)).
pub fn prop11_phi(c: &RiccatiCoeffs, epsilon: f64, alpha: f64, horizon: f64, n_steps: usize) -> Result<SolutionPath> {
    prop11_phi_with(c, epsilon, alpha, horizon, n_steps, Scheme::Auto)
}

pub fn prop11_phi_with(
    c: &RiccatiCoeffs,
    epsilon: f64,
    alpha: f64,
    horizon: f64,
    n_steps: usize,
    scheme: Scheme,
) -> Result<SolutionPath> {
    let prob = prop11_problem(c, epsilon, alpha, horizon, n_steps)?.with_scheme(scheme);
    let mut path = adams_solve(&prob)?;
    path.epsilon = epsilon;
    path.lambda = c.lambda;
    Ok(path)
}

/// V0 I^{1-alpha} phi_eps(t) + (lambda theta / eps) I^1 phi_eps(t).
pub fn prop11_log_mgf(c: &RiccatiCoeffs, epsilon: f64, alpha: f64, t: f64, n_steps: usize) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let phi = prop11_phi(c, epsilon, alpha, t, n_steps)?;
    log_mgf_from_phi(c, epsilon, alpha, &phi.grid)
}

pub fn log_mgf_from_phi(c: &RiccatiCoeffs, epsilon: f64, alpha: f64, phi: &GridFn) -> Result<f64> {
    let first = if alpha == 1.0 {
        *phi.values.last().unwrap()
    } else {
        *fractional_integral(1.0 - alpha, phi)?.values.last().unwrap()
    };
    let mut s = KahanSum::default();
    for w in phi.values.windows(2) {
        s.add(0.5 * phi.dt * (w[0] + w[1]));
    }
    Ok(c.v0 * first + c.lambda * c.theta / epsilon * s.value())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub epsilon: f64,
    /// max_n |phi_eps(t_n) - eps psi(t_n eps^{-1/alpha})| / |phi_eps(t_n)|
    pub max_rel_gap: f64,
    /// sup over t >= t_min of |phi_eps(t)/eps - U1(p)|
    pub u1_gap: f64,
}

/// Compares phi_eps with the rescaled eps = 1 solution along a ladder.
pub fn scaling_check(
    c: &RiccatiCoeffs,
    alpha: f64,
    eps_ladder: &[f64],
    horizon: f64,
    n_steps: usize,
    t_min: f64,
) -> Result<Vec<ScalingRow>> {
    if eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(VlxError::param("eps_ladder", "must be decreasing"));
    }
    let u = levy::u1(c)?;
    let mut rows = Vec::new();
    for &e in eps_ladder {
        let phi = prop11_phi(c, e, alpha, horizon, n_steps)?;
        let stretched = horizon * e.powf(-1.0 / alpha);
        let psi = prop11_phi(c, 1.0, alpha, stretched, n_steps)?;
        let mut gap = 0.0f64;
        let mut ugap = 0.0f64;
        for (j, (a, b)) in phi.values().iter().zip(psi.values()).enumerate().skip(1) {
            let rel = (a - e * b).abs() / a.abs().max(f64::MIN_POSITIVE);
            gap = gap.max(rel);
            if phi.grid.t(j) >= t_min {
                ugap = ugap.max((a / e - u).abs());
            }
        }
        rows.push(ScalingRow { epsilon: e, max_rel_gap: gap, u1_gap: ugap });
    }
    Ok(rows)
}

/// int_0^T G(s, psi(s)) xi(T - s) ds on the solver grid.
pub fn mgf_integral(problem: &RiccatiProblem, path: &SolutionPath, xi0: &Curve) -> Result<f64> {
    let n = problem.n_steps;
    let dt = problem.dt();
    let t_end = problem.horizon;
    let v = path.values();
    let mut s = KahanSum::default();
    let mut prev = problem.gbar(v[0])? * xi0.eval(t_end);
    for c in 1..=n {
        let f = problem.forcing.value((c as f64 - 0.5) * dt);
        let (a, b) = ((c - 1) as f64 * dt, c as f64 * dt);
        // xi(T - s) is linear in s between its knots; integrate the step part exactly
        s.add(f * xi0.integral(t_end - b, t_end - a));
        let cur = problem.gbar(v[c])? * xi0.eval(t_end - b);
        s.add(0.5 * dt * (prev + cur));
        prev = cur;
    }
    Ok(s.value())
}

/// log E[exp(int_0^T f(T-s) V_s ds)] for the forcing of `problem`.
pub fn fdd_log_mgf_eps(problem: &RiccatiProblem, xi0: &Curve) -> Result<f64> {
    if problem.forcing.values.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let path = adams_solve(problem)?;
    mgf_integral(problem, &path, xi0)
}

/// Smaller root of phi = -u^2/2 + sigma^2 phi^2 / 2.
pub fn hyper_rough_phi(u: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(VlxError::param("sigma", format!("must be positive, got {sigma}")));
    }
    let s2u2 = sigma * sigma * u * u;
    // (1 - sqrt(1 + s^2 u^2)) / s^2 without cancellation
    Ok(-u * u / (1.0 + (1.0 + s2u2).sqrt()))
}

/// Solves phi = I^alpha(-u^2/2 + sigma^2 phi^2/2) on [0, T].
pub fn hyper_rough_solve(u: f64, sigma: f64, alpha: f64, horizon: f64, n_steps: usize) -> Result<SolutionPath> {
    let p = RiccatiProblem::new(
        alpha,
        0.0,
        1.0,
        sigma,
        LevyMeasureSpec::None,
        Forcing::constant(-0.5 * u * u),
        horizon,
        n_steps,
    )?
    .with_scheme(Scheme::Adams);
    adams_solve(&p)
}
