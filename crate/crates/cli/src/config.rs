//! Run configuration. Every section has defaults, a TOML file may override
//! any subset, and command-line flags override the file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vlx_core::levy::LevyMeasureSpec;
use vlx_core::vie::Forcing;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureCfg {
    None,
    Cgmy { c: f64, m: f64, y: f64 },
}

impl MeasureCfg {
    pub fn build(&self) -> Result<LevyMeasureSpec, CliError> {
        match self {
            MeasureCfg::None => Ok(LevyMeasureSpec::None),
            MeasureCfg::Cgmy { c, m, y } => Ok(LevyMeasureSpec::cgmy(*c, *m, *y)?),
        }
    }
}

fn figure1_measure() -> MeasureCfg {
    MeasureCfg::Cgmy { c: 1.0, m: 3.0, y: 1.5 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingCfg {
    /// left end of each constant piece, starting at 0
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl Default for ForcingCfg {
    fn default() -> Self {
        ForcingCfg { breaks: vec![0.0, 0.5], values: vec![-1.0, -0.5] }
    }
}

impl ForcingCfg {
    pub fn build(&self) -> Result<Forcing, CliError> {
        Ok(Forcing::steps(self.breaks.clone(), self.values.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure1Cfg {
    pub epsilon: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub sigma_vol: f64,
    pub horizon: f64,
    pub levy_measure: MeasureCfg,
    pub forcing: ForcingCfg,
}

impl Default for Figure1Cfg {
    fn default() -> Self {
        Figure1Cfg {
            epsilon: 0.01,
            alpha: 0.7,
            lambda: 1.0,
            sigma_vol: 0.4,
            horizon: 1.0,
            levy_measure: figure1_measure(),
            forcing: ForcingCfg::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VieCfg {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub sigma_vol: f64,
    pub horizon: f64,
    /// auto, adams or kappa
    pub scheme: String,
    pub tol: f64,
    pub levy_measure: MeasureCfg,
    pub forcing: ForcingCfg,
}

impl Default for VieCfg {
    fn default() -> Self {
        VieCfg {
            alpha: 0.7,
            lambda: 1.0,
            epsilon: 0.1,
            sigma_vol: 0.4,
            horizon: 1.0,
            scheme: "auto".into(),
            tol: 1e-9,
            levy_measure: figure1_measure(),
            forcing: ForcingCfg::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Psi0Cfg {
    pub lambda: f64,
    pub sigma_vol: f64,
    pub levy_measure: MeasureCfg,
    /// forcing values f <= 0 at which psi0 = Lambda^{-1}(-f) is tabulated
    pub f: Vec<f64>,
}

impl Default for Psi0Cfg {
    fn default() -> Self {
        Psi0Cfg { lambda: 1.0, sigma_vol: 0.4, levy_measure: figure1_measure(), f: vec![0.0, -0.25, -0.5, -1.0, -2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgfCfg {
    pub alpha: f64,
    pub lambda: f64,
    pub sigma_vol: f64,
    pub theta: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub levy_measure: MeasureCfg,
}

impl Default for MgfCfg {
    fn default() -> Self {
        MgfCfg {
            alpha: 1.0,
            lambda: 1.0,
            sigma_vol: 0.4,
            theta: 0.04,
            horizon: 1.0,
            times: vec![0.4, 0.9],
            u: vec![-0.5, -0.3],
            levy_measure: figure1_measure(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HittingCfg {
    /// E[X_1] >= 0
    pub mean: f64,
    pub sigma2: f64,
    /// law of -(jumps of X)
    pub levy_measure: MeasureCfg,
    pub barriers: Vec<f64>,
    pub rates: Vec<f64>,
}

impl Default for HittingCfg {
    fn default() -> Self {
        HittingCfg { mean: 1.0, sigma2: 1.0, levy_measure: MeasureCfg::None, barriers: vec![0.5, 1.0], rates: vec![0.5, 1.0, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McCfg {
    pub n_paths: usize,
    pub dt: f64,
    pub jump_trunc: f64,
    /// horizon of the first-passage runs
    pub hitting_horizon: f64,
}

impl Default for McCfg {
    fn default() -> Self {
        McCfg { n_paths: 20_000, dt: 1e-3, jump_trunc: 0.01, hitting_horizon: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlCfg {
    pub alpha: f64,
    pub beta: f64,
    pub z: Vec<f64>,
}

impl Default for MlCfg {
    fn default() -> Self {
        MlCfg { alpha: 0.7, beta: 0.7, z: vec![0.0, -0.5, -1.0, -5.0, -20.0, -100.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub steps: usize,
    /// decreasing epsilon values; empty means none
    pub eps_ladder: Vec<f64>,
    pub figure1: Figure1Cfg,
    pub vie: VieCfg,
    pub psi0: Psi0Cfg,
    pub mgf: MgfCfg,
    pub hitting: HittingCfg,
    pub mc: McCfg,
    pub ml: MlCfg,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            steps: 2000,
            eps_ladder: Vec::new(),
            figure1: Figure1Cfg::default(),
            vie: VieCfg::default(),
            psi0: Psi0Cfg::default(),
            mgf: MgfCfg::default(),
            hitting: HittingCfg::default(),
            mc: McCfg::default(),
            ml: MlCfg::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML file, or the `config` echo of a JSON summary.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let echo = v.get("config").cloned().unwrap_or(v);
            serde_json::from_value(echo).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.steps < 16 {
            return Err(CliError::Config(format!("steps: need at least 16, got {}", self.steps)));
        }
        if self.eps_ladder.iter().any(|e| !(*e > 0.0)) {
            return Err(CliError::Config("eps_ladder: values must be positive".into()));
        }
        if self.eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(CliError::Config("eps_ladder: values must be strictly decreasing".into()));
        }
        Ok(())
    }
}
