//! Riccati-Volterra machinery for rescaled rough Heston models with jumps.
//!
//! Modules, bottom up: [`specfun`] (Gamma, Mittag-Leffler, fractional
//! integrals), [`kernels`] (power and Mittag-Leffler kernels, resolvents),
//! [`levy`] (jump functionals, exponents and their inverses), [`vie`]
//! (nonlinear Volterra solvers and mgf assembly) and [`mc`] (Monte Carlo
//! oracles).

pub mod error;
pub mod kernels;
pub mod levy;
pub mod mc;
pub mod vie;
pub mod quad;
pub mod specfun;

pub use error::{Result, VlxError};
