//! Scenario ingestion, command dispatch, and result emission for the
//! bounded-input networked stabilization toolkit.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

/// Sample count under which drift verdicts carry a standard-error warning.
pub const MIN_DRIFT_SAMPLES: usize = 1_000;

/// Documented defaults applied when a scenario omits the corresponding
/// field or a command the corresponding flag.
pub mod defaults {
    /// Default horizon, in replanning windows (`horizon = 2000 kappa`).
    pub const HORIZON_WINDOWS: u64 = 2_000;
    /// Default Monte Carlo trajectory count.
    pub const TRAJECTORIES: usize = 2_000;
    /// Default burn-in fraction for the plateau verdict (0.5 compares the
    /// last quarter of the horizon against the second quarter).
    pub const BURN_IN: f64 = 0.5;
    /// Default samples per drift/fourth-moment probe.
    pub const DRIFT_SAMPLES: usize = 10_000;
    /// Default probe radii, as multiples of the level `J`.
    pub const PROBE_LEVEL_MULTIPLES: [f64; 3] = [2.0, 10.0, 100.0];
}
