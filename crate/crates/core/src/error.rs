//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by kinematics, control loops, the simulator and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Euler extraction is ambiguous: |cos(pitch)| fell below the guard.
    #[error("gimbal lock: |cos(pitch)| = {cos_pitch:.3e} below guard {guard:.3e}")]
    GimbalLock { cos_pitch: f64, guard: f64 },

    /// A deflection component is outside the configured mechanical range.
    #[error("deflection limit exceeded on axis {axis}: |{value:.6}| > {limit:.6}")]
    DeflectionLimit { axis: usize, value: f64, limit: f64 },

    /// The requested wrench cannot be rendered within the deflection range.
    #[error("wrench unreachable within deflection limits on axis {axis}: needs |{needed:.6}| > {limit:.6}")]
    Unreachable { axis: usize, needed: f64, limit: f64 },

    /// The root solver exhausted its iteration budget.
    #[error("root solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Invalid filter design parameters.
    #[error("bad filter parameters: {0}")]
    BadParams(String),

    /// Invalid or inconsistent scenario configuration.
    #[error("config: {0}")]
    Config(String),

    /// A series is too short for the requested frequency estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A collision-analysis trace never makes contact.
    #[error("no contact detected in trace")]
    NoContactDetected,

    /// A scenario aborted mid-run.
    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
