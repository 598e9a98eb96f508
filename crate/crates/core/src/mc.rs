//! Monte Carlo oracles.
//!
//! Every path draws from its own ChaCha8 stream (seed, path index), and
//! per-path results are reduced in path order with compensated summation, so
//! estimates do not depend on the number of worker threads. `VLX_THREADS`
//! caps the worker count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Result, VlxError};
use crate::levy::{self, Curve, LevyMeasureSpec, LevyTriple, SpectrallyNegative};
use crate::quad::{self, GaussRule, KahanSum};
use crate::specfun::GridFn;
use crate::vie::Forcing;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    /// jumps below this size are replaced by a Brownian motion of equal variance
    pub jump_trunc: f64,
    pub horizon: f64,
    /// worker cap; falls back to `VLX_THREADS`, then to the rayon default
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(seed: u64, n_paths: usize, dt: f64, horizon: f64) -> Result<Self> {
        let c = McConfig { seed, n_paths, dt, jump_trunc: 1e-3, horizon, threads: None };
        c.validate()?;
        Ok(c)
    }

    pub fn with_jump_trunc(mut self, delta: f64) -> Result<Self> {
        self.jump_trunc = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_threads(mut self, n: usize) -> Self {
        self.threads = Some(n.max(1));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1000 {
            return Err(VlxError::Config(format!("need at least 1000 paths, got {}", self.n_paths)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(VlxError::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon / 100.0) {
            return Err(VlxError::Config(format!("dt must lie in (0, horizon/100], got {}", self.dt)));
        }
        if !(self.jump_trunc > 0.0 && self.jump_trunc.is_finite()) {
            return Err(VlxError::Config(format!("jump truncation must be positive, got {}", self.jump_trunc)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Estimate of an expectation with its standard error and a bias allowance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// discretisation / truncation allowance, reported and not corrected
    pub bias_bound: f64,
    pub n_paths: usize,
}

impl McEstimate {
    fn from_samples(xs: &[f64], bias_bound: f64) -> Self {
        let n = xs.len() as f64;
        let mut s = KahanSum::default();
        xs.iter().for_each(|x| s.add(*x));
        let mean = s.value() / n;
        let mut v = KahanSum::default();
        xs.iter().for_each(|x| v.add((x - mean) * (x - mean)));
        let var = v.value() / (n - 1.0);
        McEstimate { estimate: mean, stderr: (var / n).sqrt(), bias_bound, n_paths: xs.len() }
    }

    /// |estimate - exact| <= k stderr + bias_bound.
    pub fn agrees(&self, exact: f64, k: f64) -> bool {
        (self.estimate - exact).abs() <= k * self.stderr + self.bias_bound
    }
}

/// Simulated paths on a uniform grid, one row per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub dt: f64,
    pub paths: Vec<Vec<f64>>,
    pub seed: u64,
    pub generator: &'static str,
}

impl PathBatch {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Values of all paths at node k.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[k]).collect()
    }

    pub fn path(&self, i: usize) -> GridFn {
        GridFn { dt: self.dt, values: self.paths[i].clone() }
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(path as u64);
    r
}

fn worker_count(cfg: &McConfig) -> Option<usize> {
    cfg.threads.or_else(|| std::env::var("VLX_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|n| *n > 0))
}

/// Runs `f` for every path index, returning results in path order.
fn per_path<T, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let run = || -> Result<Vec<T>> {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(cfg.seed, i);
                f(i, &mut rng)
            })
            .collect()
    };
    match worker_count(cfg) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| VlxError::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Jumps of size >= delta: total rate, compensator and an inverse-CDF table;
/// jumps below delta: second and third moments.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    pub delta: f64,
    /// nu([delta, inf))
    pub rate: f64,
    /// int_delta^inf x nu(dx)
    pub big_mean: f64,
    /// int_0^delta x^2 nu(dx)
    pub small_var: f64,
    /// int_0^delta x^3 nu(dx)
    pub small_third: f64,
    x: Vec<f64>,
    /// nu([x_i, x_max])
    tail: Vec<f64>,
}

impl JumpSampler {
    pub fn new(measure: &LevyMeasureSpec, delta: f64) -> Result<Self> {
        let (x_max, small_var, small_third) = match measure {
            LevyMeasureSpec::None => {
                return Ok(JumpSampler {
                    delta,
                    rate: 0.0,
                    big_mean: 0.0,
                    small_var: 0.0,
                    small_third: 0.0,
                    x: vec![],
                    tail: vec![],
                })
            }
            LevyMeasureSpec::Cgmy(c) => {
                let h = |x: f64| c.c * (-c.m * x).exp();
                let s2 = quad::integrate_left_singular(h, 0.0, delta, 2.0 - c.y, 1e-300, 1e-12)?;
                let s3 = quad::integrate_left_singular(h, 0.0, delta, 3.0 - c.y, 1e-300, 1e-12)?;
                (delta + 50.0 / c.m, s2, s3)
            }
            LevyMeasureSpec::Tabulated(t) => {
                let top = t.x[t.x.len() - 1];
                let d = delta.min(top);
                let s2 = quad::integrate(|x| x * x * t.eval(x), 0.0, d, 1e-300, 1e-12)?;
                let s3 = quad::integrate(|x| x * x * x * t.eval(x), 0.0, d, 1e-300, 1e-12)?;
                (top, s2, s3)
            }
        };
        if delta >= x_max {
            return Err(VlxError::Config(format!("jump truncation {delta} exceeds the support of the measure")));
        }
        // log-spaced table on [delta, x_max]
        let m = 2000;
        let ratio = (x_max / delta).ln() / m as f64;
        let x: Vec<f64> = (0..=m).map(|i| delta * (ratio * i as f64).exp()).collect();
        let rule = GaussRule::legendre(8);
        let mut tail = vec![0.0; m + 1];
        let mut mean = KahanSum::default();
        for i in (0..m).rev() {
            let mass = rule.integrate(x[i], x[i + 1], |s| measure.density(s));
            tail[i] = tail[i + 1] + mass;
            mean.add(rule.integrate(x[i], x[i + 1], |s| s * measure.density(s)));
        }
        let rate = tail[0];
        if !rate.is_finite() || rate > 1e9 {
            return Err(VlxError::Config(format!("jump rate above truncation {delta} is {rate}; raise the truncation")));
        }
        Ok(JumpSampler { delta, rate, big_mean: mean.value(), small_var, small_third, x, tail })
    }

    /// Jump size from a uniform variate in (0, 1).
    pub fn size(&self, u: f64) -> f64 {
        let t = u * self.rate;
        // tail is decreasing: find i with tail[i] >= t > tail[i+1]
        let i = self.tail.partition_point(|v| *v >= t).saturating_sub(1).min(self.x.len() - 2);
        let (t0, t1) = (self.tail[i], self.tail[i + 1]);
        let w = if t1 > 0.0 {
            (t0 / t).ln() / (t0 / t1).ln()
        } else {
            (t0 - t) / t0
        };
        self.x[i] + (self.x[i + 1] - self.x[i]) * w.clamp(0.0, 1.0)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        self.size(u.max(f64::MIN_POSITIVE))
    }
}

/// Generates increments of a Levy process with triple (drift, sigma^2, nu).
struct LevyStepper {
    drift_dt: f64,
    diff_sd: f64,
    big: JumpSampler,
    /// big-jump rate per step
    step_rate: f64,
}

impl LevyStepper {
    fn new(triple: &LevyTriple, cfg: &McConfig) -> Result<Self> {
        let big = JumpSampler::new(&triple.measure, cfg.jump_trunc)?;
        let step_rate = big.rate * cfg.dt;
        if step_rate > 50.0 {
            return Err(VlxError::Config(format!(
                "{step_rate:.1} expected jumps per step above truncation {}; raise it or lower dt",
                cfg.jump_trunc
            )));
        }
        Ok(LevyStepper {
            drift_dt: (triple.drift - big.big_mean) * cfg.dt,
            diff_sd: ((triple.sigma2 + big.small_var) * cfg.dt).sqrt(),
            big,
            step_rate,
        })
    }

    /// Per-path state: remaining exponential clock for the next big jump.
    fn clock(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(Exp1)
    }

    fn step(&self, rng: &mut ChaCha8Rng, clock: &mut f64) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let mut dx = self.drift_dt + self.diff_sd * z;
        if self.step_rate > 0.0 {
            let mut left = self.step_rate;
            while *clock <= left {
                left -= *clock;
                dx += self.big.draw(rng);
                *clock = rng.sample(Exp1);
            }
            *clock -= left;
        }
        dx
    }
}

/// Euler-grid paths of the Levy process with the given triple, started at 0.
pub fn simulate_levy(triple: &LevyTriple, cfg: &McConfig) -> Result<PathBatch> {
    cfg.validate()?;
    let st = LevyStepper::new(triple, cfg)?;
    let n = cfg.n_steps();
    let paths = per_path(cfg, |_, rng| {
        let mut clock = st.clock(rng);
        let mut p = Vec::with_capacity(n + 1);
        let mut z = 0.0;
        p.push(z);
        for _ in 0..n {
            z += st.step(rng, &mut clock);
            p.push(z);
        }
        Ok(p)
    })?;
    Ok(PathBatch { dt: cfg.dt, paths, seed: cfg.seed, generator: "chacha8/levy-euler" })
}

/// First passage times of the mirrored process over each barrier, infinity
/// when not reached before the horizon.
fn passage_times(x: &SpectrallyNegative, barriers: &[f64], cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    let st = LevyStepper::new(&x.mirrored(), cfg)?;
    let n = cfg.n_steps();
    let deepest = barriers.iter().cloned().fold(0.0, f64::max);
    per_path(cfg, |_, rng| {
        let mut clock = st.clock(rng);
        let mut hit: Vec<f64> = barriers.iter().map(|b| if *b == 0.0 { 0.0 } else { f64::INFINITY }).collect();
        let mut z = 0.0;
        let mut k = 0;
        while k < n && -z <= deepest {
            z += st.step(rng, &mut clock);
            k += 1;
            for (i, b) in barriers.iter().enumerate() {
                if hit[i].is_infinite() && -z > *b {
                    hit[i] = k as f64 * cfg.dt;
                }
            }
        }
        Ok(hit)
    })
}

fn laplace_means(taus: &[Vec<f64>], i: usize, q: f64) -> Vec<f64> {
    taus.iter().map(|t| if t[i].is_finite() { (-q * t[i]).exp() } else { 0.0 }).collect()
}

/// E[e^{-q tau_b}] for every (b, q) pair from one set of paths.
///
/// Crossings are detected on the Euler grid only. The bias allowance adds the
/// horizon cut-off e^{-q T}, the gap to a rerun at step 4 dt (for an O(sqrt dt)
/// monitoring error this gap equals the bias at dt) and the effect of the
/// small-jump substitution on V.
pub fn first_passage_laplace_grid(
    x: &SpectrallyNegative,
    barriers: &[f64],
    qs: &[f64],
    cfg: &McConfig,
) -> Result<Vec<Vec<McEstimate>>> {
    cfg.validate()?;
    if barriers.iter().any(|b| !(*b >= 0.0 && b.is_finite())) || qs.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
        return Err(VlxError::param("b, q", "barriers and rates must be non-negative"));
    }
    let fine = passage_times(x, barriers, cfg)?;
    let coarse_cfg = McConfig { dt: 4.0 * cfg.dt, seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15, ..cfg.clone() };
    let coarse = passage_times(x, barriers, &coarse_cfg)?;
    let small_third = JumpSampler::new(&x.measure, cfg.jump_trunc)?.small_third;
    let mut out = Vec::with_capacity(barriers.len());
    for (i, &b) in barriers.iter().enumerate() {
        let mut row = Vec::with_capacity(qs.len());
        for &q in qs {
            if b == 0.0 || q == 0.0 && x.mean > 0.0 {
                row.push(McEstimate { estimate: 1.0, stderr: 0.0, bias_bound: 0.0, n_paths: cfg.n_paths });
                continue;
            }
            let est = McEstimate::from_samples(&laplace_means(&fine, i, q), 0.0);
            let rough = McEstimate::from_samples(&laplace_means(&coarse, i, q), 0.0);
            let phi = levy::v_inverse(x, q)?;
            let lt = (-b * phi).exp();
            // |V - V_trunc| <= p^3/6 int_0^delta x^3 nu, carried through V^{-1}
            let h = 1e-6 * (1.0 + phi);
            let lo = (phi - h).max(0.0);
            let vp = (levy::v_exponent(x, phi + h)? - levy::v_exponent(x, lo)?) / (phi + h - lo);
            let trunc = b * lt * phi.powi(3) / 6.0 * small_third / vp.max(1e-300);
            let bias = (-q * cfg.horizon).exp() + (est.estimate - rough.estimate).abs() + trunc;
            row.push(McEstimate { bias_bound: bias, ..est });
        }
        out.push(row);
    }
    Ok(out)
}

/// E[e^{-q tau_b}] for the spectrally negative process x.
pub fn first_passage_laplace_mc(x: &SpectrallyNegative, b: f64, q: f64, cfg: &McConfig) -> Result<McEstimate> {
    if q > 0.0 && (-q * cfg.horizon).exp() > 1e-3 {
        return Err(VlxError::Config(format!(
            "horizon {} too short: paths cut off there bias the estimate by up to {:.2e}",
            cfg.horizon,
            (-q * cfg.horizon).exp()
        )));
    }
    Ok(first_passage_laplace_grid(x, &[b], &[q], cfg)?[0][0])
}

/// Empirical E[exp(sum u_i X_{g(s_i)})] with X_t = H_{-t} and g' = lambda xi.
///
/// All barriers are swept along a single path of Z, so the sampled vector is
/// non-decreasing by construction. Paths that have not reached the deepest
/// barrier by the horizon enter with H = horizon; their total weight and the
/// gap to a rerun at step 4 dt form the bias allowance.
pub fn subordinator_fdd_mc(
    triple: &LevyTriple,
    xi00: &Curve,
    times: &[f64],
    u: &[f64],
    cfg: &McConfig,
) -> Result<McEstimate> {
    if u.len() != times.len() || u.iter().any(|v| !(*v <= 0.0)) {
        return Err(VlxError::param("u", "need one non-positive weight per time"));
    }
    if u.iter().all(|v| *v == 0.0) {
        return Ok(McEstimate { estimate: 1.0, stderr: 0.0, bias_bound: 0.0, n_paths: cfg.n_paths });
    }
    let values = |c: &McConfig| -> Result<(Vec<f64>, f64)> {
        let samples = subordinator_fdd_samples(triple, xi00, times, c)?;
        let vals: Vec<f64> =
            samples.iter().map(|h| h.iter().zip(u).map(|(a, b)| a * b).sum::<f64>().exp()).collect();
        let cut = samples
            .iter()
            .zip(&vals)
            .filter(|(h, _)| h.iter().any(|x| *x >= c.horizon))
            .map(|(_, v)| *v)
            .sum::<f64>()
            / c.n_paths as f64;
        Ok((vals, cut))
    };
    let (vals, cut) = values(cfg)?;
    let coarse_cfg = McConfig { dt: 4.0 * cfg.dt, seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15, ..cfg.clone() };
    let (coarse, _) = values(&coarse_cfg)?;
    let est = McEstimate::from_samples(&vals, 0.0);
    let rough = McEstimate::from_samples(&coarse, 0.0);
    Ok(McEstimate { bias_bound: cut + (est.estimate - rough.estimate).abs(), ..est })
}

/// Passage times (X_{g(s_1)}, ..., X_{g(s_n)}) per path.
pub fn subordinator_fdd_samples(triple: &LevyTriple, xi00: &Curve, times: &[f64], cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if times.is_empty() || !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(VlxError::param("times", "must be strictly increasing and positive"));
    }
    if xi00.min() < 0.0 {
        return Err(VlxError::param("xi0", "forward variance must be non-negative"));
    }
    let lambda = -triple.drift;
    if !(lambda > 0.0) {
        return Err(VlxError::param("drift", "the model triple needs drift -lambda < 0"));
    }
    let levels: Vec<f64> = times.iter().map(|s| lambda * xi00.integral(0.0, *s)).collect();
    let st = LevyStepper::new(triple, cfg)?;
    let n = cfg.n_steps();
    per_path(cfg, |_, rng| {
        let mut clock = st.clock(rng);
        let mut out = vec![cfg.horizon; levels.len()];
        let mut next = 0;
        while next < levels.len() && levels[next] == 0.0 {
            out[next] = 0.0;
            next += 1;
        }
        let mut z = 0.0;
        let mut k = 0;
        while next < levels.len() && k < n {
            z += st.step(rng, &mut clock);
            k += 1;
            while next < levels.len() && z < -levels[next] {
                out[next] = k as f64 * cfg.dt;
                next += 1;
            }
        }
        Ok(out)
    })
}

/// Coefficients of the variance process at alpha = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirJumpParams {
    pub lambda: f64,
    pub theta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub v0: f64,
}

impl CirJumpParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("theta", self.theta), ("epsilon", self.epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(VlxError::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("sigma", self.sigma), ("v0", self.v0)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(VlxError::param(name, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// One full-truncation Euler step of
/// eps dV = lambda (theta - V) dt + sigma sqrt(V) dW + dJ, with J compensated
/// and jump intensity V nu(dx).
struct CirStepper {
    p: CirJumpParams,
    dt: f64,
    big: JumpSampler,
}

impl CirStepper {
    fn new(p: CirJumpParams, measure: &LevyMeasureSpec, cfg: &McConfig) -> Result<Self> {
        p.validate()?;
        let big = JumpSampler::new(measure, cfg.jump_trunc)?;
        Ok(CirStepper { p, dt: cfg.dt, big })
    }

    fn step(&self, v: f64, rng: &mut ChaCha8Rng, clock: &mut f64) -> Result<f64> {
        let vp = v.max(0.0);
        let p = &self.p;
        let z: f64 = rng.sample(StandardNormal);
        let sd = ((p.sigma * p.sigma + self.big.small_var) * vp * self.dt).sqrt();
        let mut dv = p.lambda * (p.theta - v) * self.dt + sd * z - self.big.big_mean * vp * self.dt;
        if self.big.rate > 0.0 {
            let mut left = self.big.rate * vp * self.dt;
            if left > 1e4 {
                return Err(VlxError::Config(format!("jump budget exceeded: {left:.0} jumps in one step")));
            }
            while *clock <= left {
                left -= *clock;
                dv += self.big.draw(rng);
                *clock = rng.sample(Exp1);
            }
            *clock -= left;
        }
        Ok(v + dv / p.epsilon)
    }
}

/// Paths of V on [0, horizon]; after full truncation, V+ drives every step.
pub fn simulate_cir_jump(p: CirJumpParams, measure: &LevyMeasureSpec, cfg: &McConfig) -> Result<PathBatch> {
    cfg.validate()?;
    let st = CirStepper::new(p, measure, cfg)?;
    let n = cfg.n_steps();
    let paths = per_path(cfg, |_, rng| {
        let mut clock: f64 = rng.sample(Exp1);
        let mut v = p.v0;
        let mut out = Vec::with_capacity(n + 1);
        out.push(v);
        for _ in 0..n {
            v = st.step(v, rng, &mut clock)?;
            out.push(v.max(0.0));
        }
        Ok(out)
    })?;
    Ok(PathBatch { dt: cfg.dt, paths, seed: cfg.seed, generator: "chacha8/cir-jump-euler" })
}

fn cir_mgf_samples(p: CirJumpParams, measure: &LevyMeasureSpec, forcing: &Forcing, cfg: &McConfig) -> Result<Vec<f64>> {
    let st = CirStepper::new(p, measure, cfg)?;
    let n = cfg.n_steps();
    let t_end = n as f64 * cfg.dt;
    // f(T - s) on cell k, read at the cell midpoint
    let fk: Vec<f64> = (0..n).map(|k| forcing.value(t_end - (k as f64 + 0.5) * cfg.dt)).collect();
    per_path(cfg, |_, rng| {
        let mut clock: f64 = rng.sample(Exp1);
        let mut v = p.v0;
        let mut acc = 0.0;
        for f in &fk {
            let next = st.step(v, rng, &mut clock)?;
            acc += f * 0.5 * (v.max(0.0) + next.max(0.0)) * cfg.dt;
            v = next;
        }
        Ok(acc.exp())
    })
}

/// E[exp(int_0^T f(T - s) V_s ds)] at alpha = 1 by full-truncation Euler.
///
/// The bias allowance is the gap to the same estimator at step 2 dt.
pub fn heston_jump_euler_mgf(
    p: CirJumpParams,
    measure: &LevyMeasureSpec,
    forcing: &Forcing,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    if forcing.values.iter().all(|v| *v == 0.0) {
        return Ok(McEstimate { estimate: 1.0, stderr: 0.0, bias_bound: 0.0, n_paths: cfg.n_paths });
    }
    let fine = McEstimate::from_samples(&cir_mgf_samples(p, measure, forcing, cfg)?, 0.0);
    let coarse_cfg = McConfig { dt: 2.0 * cfg.dt, seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15, ..cfg.clone() };
    let coarse = McEstimate::from_samples(&cir_mgf_samples(p, measure, forcing, &coarse_cfg)?, 0.0);
    let bias = (fine.estimate - coarse.estimate).abs();
    Ok(McEstimate { bias_bound: bias, ..fine })
}
