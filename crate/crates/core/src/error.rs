use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VlxError {
    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Mittag-Leffler evaluation failed at z = {z} ({regime})")]
    Evaluation { z: f64, regime: &'static str },

    #[error("quadrature did not converge on [{a}, {b}]: error estimate {estimate:e}")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    #[error("root bracket failure on [{lo}, {hi}]: {msg}")]
    Bracket { lo: f64, hi: f64, msg: String },

    #[error("defect {defect:e} exceeds tolerance {tol:e} at node {node} (t = {t}); refine the grid")]
    Defect { defect: f64, tol: f64, node: usize, t: f64 },

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl VlxError {
    pub(crate) fn param(name: &'static str, msg: impl Into<String>) -> Self {
        VlxError::InvalidParameter { name, msg: msg.into() }
    }

    /// True for errors caused by bad inputs rather than failed numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            VlxError::InvalidParameter { .. } | VlxError::Domain(_) | VlxError::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, VlxError>;
