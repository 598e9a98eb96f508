use serde_json::{json, Value};
use vlx_core::levy::{self, Curve, LevyMeasureSpec, LevyTriple, SpectrallyNegative};
use vlx_core::mc::{self, CirJumpParams, McConfig, McEstimate};
use vlx_core::specfun::ml;
use vlx_core::vie::{self, BoundsReport, Forcing, RiccatiProblem, Scheme, SolutionPath};

use crate::config::RunConfig;
use crate::output::{Cell, Report, Table};
use crate::CliError;

fn bounds_json(b: &BoundsReport) -> Value {
    json!({
        "max_value": b.max_value,
        "lower_gap": b.lower_gap,
        "sup_norm": b.sup_norm,
        "sup_bound": b.sup_bound,
        "holds": b.holds(1e-8),
    })
}

fn solve_json(p: &RiccatiProblem, path: &SolutionPath) -> Result<Value, CliError> {
    Ok(json!({
        "scheme": path.scheme.label(),
        "n_steps": p.n_steps,
        "max_defect": path.max_defect,
        "defect_node": path.defect_node,
        "bounds": bounds_json(&vie::bounds_report(p, path)?),
    }))
}

fn linf_gap(path: &SolutionPath, psi0: &[f64]) -> f64 {
    path.values().iter().zip(psi0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Sup gap over nodes at distance >= `margin` from t = 0 and from every
/// forcing jump, where psi_eps has no boundary layer to traverse.
fn interior_gap(p: &RiccatiProblem, path: &SolutionPath, psi0: &[f64], margin: f64) -> f64 {
    let mut g = 0.0f64;
    for (j, (a, b)) in path.values().iter().zip(psi0).enumerate() {
        let t = path.grid.t(j);
        if t >= margin && p.forcing.jumps().iter().all(|s| (t - s).abs() >= margin) {
            g = g.max((a - b).abs());
        }
    }
    g
}

pub fn figure1(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.figure1;
    let problem = |eps: f64| -> Result<RiccatiProblem, CliError> {
        Ok(RiccatiProblem::new(
            c.alpha,
            c.lambda,
            eps,
            c.sigma_vol,
            c.levy_measure.build()?,
            c.forcing.build()?,
            c.horizon,
            cfg.steps,
        )?)
    };
    let p = problem(c.epsilon)?;
    let path = vie::adams_solve(&p)?;
    let psi0 = vie::psi0_path(&p)?;
    let (gap, norm) = vie::l1_gap(&p, &path)?;
    let mut table = Table::new(&["t", "psi_eps", "psi0"]);
    for (j, (a, b)) in path.values().iter().zip(&psi0.values).enumerate() {
        table.push(vec![path.grid.t(j).into(), (*a).into(), (*b).into()]);
    }
    let mut ladder = Vec::new();
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for &e in &cfg.eps_ladder {
        let q = problem(e)?;
        let sol = vie::adams_solve(&q)?;
        let (g, n) = vie::l1_gap(&q, &sol)?;
        let psi0_q = vie::psi0_path(&q)?.values;
        monotone &= g < prev;
        prev = g;
        ladder.push(json!({
            "epsilon": e,
            "l1_gap": g,
            "l1_rel": g / n,
            "linf_gap": linf_gap(&sol, &psi0_q),
            "linf_gap_interior": interior_gap(&q, &sol, &psi0_q, 0.1),
        }));
    }
    let mut results = solve_json(&p, &path)?;
    results["epsilon"] = json!(c.epsilon);
    results["l1_gap"] = json!(gap);
    results["l1_rel"] = json!(gap / norm);
    results["linf_gap"] = json!(linf_gap(&path, &psi0.values));
    results["linf_gap_interior"] = json!(interior_gap(&p, &path, &psi0.values, 0.1));
    if !ladder.is_empty() {
        results["ladder"] = Value::Array(ladder);
        results["ladder_l1_decreasing"] = json!(monotone);
    }
    Ok(Report { command: "figure1", table, results, failed: None })
}

pub fn vie_solve(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.vie;
    let p = RiccatiProblem::new(
        c.alpha,
        c.lambda,
        c.epsilon,
        c.sigma_vol,
        c.levy_measure.build()?,
        c.forcing.build()?,
        c.horizon,
        cfg.steps,
    )?
    .with_scheme(Scheme::parse(&c.scheme)?)
    .with_tol(c.tol);
    let path = vie::adams_solve(&p)?;
    let mut table = Table::new(&["t", "psi"]);
    for (j, v) in path.values().iter().enumerate() {
        table.push(vec![path.grid.t(j).into(), (*v).into()]);
    }
    let mut results = solve_json(&p, &path)?;
    results["psi_T"] = json!(path.last());
    Ok(Report { command: "vie-solve", table, results, failed: None })
}

pub fn psi0(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.psi0;
    let m = c.levy_measure.build()?;
    let mut table = Table::new(&["f", "psi0"]);
    for &f in &c.f {
        table.push(vec![f.into(), levy::psi0_solve(f, c.lambda, c.sigma_vol, &m)?.into()]);
    }
    let results = json!({ "points": c.f.len() });
    Ok(Report { command: "psi0", table, results, failed: None })
}

pub fn mgf(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.mgf;
    let m = c.levy_measure.build()?;
    let xi = Curve::flat(c.theta);
    let limit = levy::subordinator_fdd_log_mgf(&LevyTriple::model(c.lambda, c.sigma_vol, m.clone())?, &xi, &c.times, &c.u)?;
    let forcing = Forcing::fdd(c.horizon, &c.times, &c.u)?;
    let ladder = if cfg.eps_ladder.is_empty() { vec![1.0, 0.1, 0.01, 0.001] } else { cfg.eps_ladder.clone() };
    let mut table = Table::new(&["epsilon", "log_mgf", "limit_log_mgf", "rel_gap"]);
    for e in ladder {
        let p = RiccatiProblem::new(c.alpha, c.lambda, e, c.sigma_vol, m.clone(), forcing.clone(), c.horizon, cfg.steps)?;
        let v = vie::fdd_log_mgf_eps(&p, &xi)?;
        let rel = if limit != 0.0 { ((v - limit) / limit).abs() } else { (v - limit).abs() };
        table.push(vec![e.into(), v.into(), limit.into(), rel.into()]);
    }
    let results = json!({ "limit_log_mgf": limit });
    Ok(Report { command: "mgf", table, results, failed: None })
}

pub fn hitting(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.hitting;
    let x = SpectrallyNegative::new(c.mean, c.sigma2, c.levy_measure.build()?)?;
    let mut table = Table::new(&["b", "q", "v_inverse", "laplace"]);
    let mut worst: Option<f64> = None;
    for &b in &c.barriers {
        for &q in &c.rates {
            let val = levy::hitting_laplace(&x, b, q)?;
            if x.measure.is_none() && c.sigma2 > 0.0 {
                // inverse-Gaussian closed form
                let root = (-c.mean + (c.mean * c.mean + 2.0 * c.sigma2 * q).sqrt()) / c.sigma2;
                let err = (val - (-b * root).exp()).abs();
                worst = Some(worst.map_or(err, |w: f64| w.max(err)));
            }
            table.push(vec![b.into(), q.into(), levy::v_inverse(&x, q)?.into(), val.into()]);
        }
    }
    let results = json!({ "closed_form_max_error": worst });
    Ok(Report { command: "hitting", table, results, failed: None })
}

fn mc_row(table: &mut Table, name: &str, e: &McEstimate, exact: f64) -> bool {
    let ok = e.agrees(exact, 3.0);
    let z = if e.stderr > 0.0 { (e.estimate - exact) / e.stderr } else { 0.0 };
    table.push(vec![
        Cell::Text(name.into()),
        e.estimate.into(),
        e.stderr.into(),
        e.bias_bound.into(),
        exact.into(),
        z.into(),
        Cell::Flag(ok),
    ]);
    ok
}

/// Runs every Monte Carlo oracle against its analytic or VIE counterpart.
pub fn mc_validate(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.mc;
    let cgmy = LevyMeasureSpec::cgmy(1.0, 3.0, 1.5)?;
    let base = |horizon: f64| -> Result<McConfig, CliError> {
        Ok(McConfig::new(cfg.seed, c.n_paths, c.dt, horizon)?.with_jump_trunc(c.jump_trunc)?)
    };
    let mut table = Table::new(&["check", "estimate", "stderr", "bias_bound", "exact", "z", "pass"]);
    let mut failures = Vec::new();

    let bm = SpectrallyNegative::new(1.0, 1.0, LevyMeasureSpec::None)?;
    let e = mc::first_passage_laplace_mc(&bm, 1.0, 1.0, &base(c.hitting_horizon)?)?;
    if !mc_row(&mut table, "hitting_brownian_b1_q1", &e, levy::hitting_laplace(&bm, 1.0, 1.0)?) {
        failures.push("hitting_brownian_b1_q1");
    }

    let x = SpectrallyNegative::new(1.0, 0.16, cgmy.clone())?;
    let e = mc::first_passage_laplace_mc(&x, 1.0, 1.0, &base(c.hitting_horizon)?)?;
    if !mc_row(&mut table, "hitting_cgmy_b1_q1", &e, levy::hitting_laplace(&x, 1.0, 1.0)?) {
        failures.push("hitting_cgmy_b1_q1");
    }

    let tri = LevyTriple::model(1.0, 0.5, LevyMeasureSpec::None)?;
    let (times, u) = ([0.4, 0.9], [-0.5, -0.3]);
    let xi = Curve::flat(0.3);
    let e = mc::subordinator_fdd_mc(&tri, &xi, &times, &u, &base(10.0)?)?;
    if !mc_row(&mut table, "subordinator_fdd_brownian", &e, levy::subordinator_fdd_log_mgf(&tri, &xi, &times, &u)?.exp())
    {
        failures.push("subordinator_fdd_brownian");
    }

    let forcing = Forcing::fdd(1.0, &times, &u)?;
    let p = RiccatiProblem::new(1.0, 1.0, 1.0, 0.4, cgmy.clone(), forcing.clone(), 1.0, cfg.steps)?;
    let vie_value = vie::fdd_log_mgf_eps(&p, &Curve::flat(0.04))?.exp();
    let params = CirJumpParams { lambda: 1.0, theta: 0.04, sigma: 0.4, epsilon: 1.0, v0: 0.04 };
    let e = mc::heston_jump_euler_mgf(params, &cgmy, &forcing, &base(1.0)?)?;
    if !mc_row(&mut table, "heston_jump_vs_vie", &e, vie_value) {
        failures.push("heston_jump_vs_vie");
    }

    let results = json!({ "checks": table.rows.len(), "failed": failures });
    let failed = (!failures.is_empty()).then(|| format!("{} Monte Carlo comparisons failed: {}", failures.len(), failures.join(", ")));
    Ok(Report { command: "mc-validate", table, results, failed })
}

pub fn ml_eval(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.ml;
    let mut table = Table::new(&["z", "value"]);
    for &z in &c.z {
        table.push(vec![z.into(), ml(c.alpha, c.beta, z)?.into()]);
    }
    let results = json!({ "alpha": c.alpha, "beta": c.beta, "points": c.z.len() });
    Ok(Report { command: "ml-eval", table, results, failed: None })
}
