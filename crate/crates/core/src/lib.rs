//! Mild solutions of stochastic impulsive fractional evolution equations with
//! infinite delay, on finite spectral truncations of the generator.
//!
//! The state space is `R^N` (coefficients in an orthonormal eigenbasis of
//! `A`); the noise is a truncated Q-Wiener process; the effective order is
//! `q = 1 + alpha` with `alpha in (0, 1)`.

pub mod config;
pub mod error;
pub mod heat;
pub mod mittag;
pub mod noise;
pub mod phase_space;
pub mod problem;
pub mod quad;
pub mod solver;
pub mod stability;

pub use error::{Error, Hypothesis, Result};
pub use mittag::{ml_scalar, sq_apply, sq_integral_apply, tq_apply, MLOrder, SpectralOperator};
pub use noise::{QWienerPath, QWienerSpec};
pub use phase_space::{HistoryPath, HistorySegment, PhaseSpaceSpec, Prehistory, Rho, TimeGrid};
pub use problem::{
    a_priori_bound, check_existence_condition, check_apriori_condition, check_stability_condition,
    ConditionReport, HypothesisConstants, Kappa, ProblemSpec,
};
pub use solver::{iterate_diff, mild_evaluate, picard_solve, GridSpec, PicardConfig, PicardDiagnostics, Solver, Trajectory};
pub use stability::{bihari_bound, epsilon_time, ms_stability_experiment, BihariInput, BihariResult, Perturbation, StabilityReport};
