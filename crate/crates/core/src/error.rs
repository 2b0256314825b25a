//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Inconsistent matrix or vector dimensions in an input.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A rotation block with angle 0 or pi equals +/-I and must be declared
    /// as a pair of +/-1 blocks instead.
    #[error("rotation angle {theta} is degenerate (0 or pi); declare +/-1 blocks instead")]
    DegenerateRotation { theta: f64 },

    /// The orthogonal subsystem cannot be steered to an arbitrary state
    /// within `d2` steps.
    #[error("(A2, B2) is not reachable within d2 = {d2} steps")]
    NotReachable { d2: usize },

    /// A matrix required to have full row rank is numerically rank deficient.
    #[error("rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    /// Power iteration did not reach the requested tolerance.
    #[error(
        "power iteration did not converge after {iterations} iterations (best estimate {best})"
    )]
    NonConvergence { best: f64, iterations: usize },

    /// The channel mean has a zero component, so the mean-inverting policy
    /// is undefined.
    #[error("channel mean component {index} is zero; mean-inverting policy undefined")]
    ZeroMeanComponent { index: usize },

    /// A planned control exceeded the declared authority. Never expected for
    /// feasible parameters; indicates an internal inconsistency.
    #[error("planned control norm {norm} exceeds authority {umax}")]
    AdmissibilityViolation { norm: f64, umax: f64 },

    /// The controller was stepped with a time index that disagrees with its
    /// internal phase.
    #[error("controller phase {phase} disagrees with time index {t}")]
    PhaseDesync { t: u64, phase: usize },

    /// Policy parameters requested for planning are not feasible.
    #[error("policy parameters are infeasible: {0}")]
    Infeasible(String),

    /// A drift probe lies inside the level set where no drift is guaranteed.
    #[error("probe norm {norm} is inside the level set (J = {j})")]
    ProbeInsideLevelSet { norm: f64, j: f64 },

    /// A scenario value is out of range or otherwise unusable.
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
