//! Bounded-input stabilization of marginally stable linear plants whose
//! control signals cross an unreliable channel, with Monte Carlo machinery
//! to verify the closed loop empirically.
//!
//! The crate synthesizes saturated, window-replanned control policies for
//! block-structured plants (Schur-stable part plus an orthogonal part), for
//! two channel models: per-component multiplicative noise with nonzero mean,
//! and whole-burst Bernoulli packet drops with an actuator buffer. Alongside
//! synthesis it provides deterministic feasibility checks and seeded
//! simulation to test admissibility, window-wise drift of the orthogonal
//! state, fourth-moment increment bounds, and mean-square boundedness.

pub mod error;
pub mod model;
pub mod noise;
pub mod policy;
pub mod reachability;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

// Matrix types appear throughout the public API.
pub use nalgebra;
