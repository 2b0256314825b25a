//! Feasibility checks, policy synthesis, and the buffered controller.
//!
//! Both policies replan once per `kappa`-step window from the orthogonal
//! state alone: the stacked window control is the minimum-norm sequence that
//! would cancel `A2^kappa x2`, radially saturated to a radius `r` so that
//! every emitted control respects the authority `Umax`.
//!
//! General channel (per-component noise with nonzero mean):
//!
//! ```text
//! U = -( R+ . sat_r(A2^kappa x2) ) o inv(mean)        (o = Hadamard)
//! a  = Umax (1 - kappa psi |R+||R|) - sqrt(kappa) C1 maxinv |R+||R_I|
//! r  = a + kappa ( |R| Umax sqrt(sigma) + |R_I| C1 / sqrt(kappa) )
//! ```
//!
//! Burst channel (whole window scaled by one Bernoulli(p) factor):
//!
//! ```text
//! U = -R+ . sat_r(A2^kappa x2)
//! a  = Umax / |R+| - sqrt(kappa) C1 |R_I| / p     (largest admissible margin)
//! r  = a + sqrt(kappa) C1 |R_I| / p  ( = Umax / |R+| )
//! ```
//!
//! Feasibility is decided numerically per scenario. Besides the two analytic
//! conditions (noise-to-signal product below one, authority above its
//! threshold), the two admissibility inequalities `r <= Umax` and
//! `maxinv |R+| r <= Umax` are checked explicitly rather than assumed to
//! follow, and each check's numbers are reported in the diagnostics.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::noise::ChannelStats;
use crate::reachability::ReachabilityData;

/// Relative slack for authority comparisons, absorbing floating-point
/// rounding in the constant chains (with a unit-gain channel `r` equals
/// `Umax` exactly in real arithmetic).
pub const AUTHORITY_SLACK: f64 = 1e-12;

/// Radial saturation: identity inside the open ball of radius `r`, radial
/// projection onto the sphere outside. `z = 0` maps to itself.
pub fn sat(r: f64, z: &DVector<f64>) -> DVector<f64> {
    debug_assert!(r > 0.0, "saturation radius must be positive");
    let norm = z.norm();
    if norm < r {
        z.clone()
    } else {
        z * (r / norm)
    }
}

/// Numeric record of one feasibility condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    /// Evaluated left-hand side.
    pub value: f64,
    /// The bound it is compared against.
    pub bound: f64,
    pub ok: bool,
}

/// Diagnostics of the general-channel feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralDiagnostics {
    /// `kappa psi |R+||R| < 1`.
    pub noise_gain: Condition,
    /// `Umax >` its threshold.
    pub authority: Condition,
    /// `r <= Umax`.
    pub sat_radius: Condition,
    /// `maxinv |R+| r <= Umax`, the stacked-control amplitude bound.
    pub amplitude: Condition,
}

/// Synthesized constants of the general-channel policy.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralPolicyParams {
    pub kappa: usize,
    pub umax: f64,
    /// Guaranteed expected decrease of `||x2||` per window outside the level
    /// set.
    pub drift_margin: f64,
    /// Saturation radius; also the base level `J` of the drift set.
    pub sat_radius: f64,
    /// Componentwise reciprocal of the stacked window mean (`kappa` copies
    /// of `1 / mu` per component).
    pub mean_inv_stacked: DVector<f64>,
    pub psi: f64,
    pub mean_inv_max: f64,
    pub feasible: bool,
    pub diagnostics: GeneralDiagnostics,
}

/// Diagnostics of the burst feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstDiagnostics {
    /// `Umax >` the burst threshold `sqrt(kappa) C1 |R+||R_I| / p`.
    pub authority: Condition,
    /// `|R+| r <= Umax`, the stacked-control amplitude bound.
    pub amplitude: Condition,
}

/// Synthesized constants of the burst policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstPolicyParams {
    pub kappa: usize,
    pub umax: f64,
    pub p: f64,
    pub drift_margin: f64,
    pub sat_radius: f64,
    pub feasible: bool,
    pub diagnostics: BurstDiagnostics,
}

/// Evaluate the general-channel conditions and synthesize `(a, r)`.
/// Infeasibility is data, not an error.
pub fn check_general(
    reach: &ReachabilityData,
    stats: &ChannelStats,
    c1: f64,
    umax: f64,
) -> Result<GeneralPolicyParams> {
    if stats.mu.len() != reach.m {
        return Err(Error::Dimension(format!(
            "channel mean has {} components, plant has m = {}",
            stats.mu.len(),
            reach.m
        )));
    }
    if !umax.is_finite() || umax <= 0.0 || !c1.is_finite() || c1 < 0.0 {
        return Err(Error::Scenario(format!(
            "check_general needs umax > 0 (got {umax}) and C1 >= 0 (got {c1})"
        )));
    }
    let kappa = reach.kappa;
    let kf = kappa as f64;
    let mean_inv_stacked = DVector::from_fn(kappa * reach.m, |i, _| 1.0 / stats.mu[i % reach.m]);

    if reach.d2 == 0 {
        // Nothing to steer: the zero policy is trivially admissible.
        let trivially = Condition {
            value: 0.0,
            bound: umax,
            ok: true,
        };
        return Ok(GeneralPolicyParams {
            kappa,
            umax,
            drift_margin: 0.0,
            sat_radius: 0.0,
            mean_inv_stacked,
            psi: stats.psi,
            mean_inv_max: stats.mean_inv_max,
            feasible: true,
            diagnostics: GeneralDiagnostics {
                noise_gain: Condition {
                    value: 0.0,
                    bound: 1.0,
                    ok: true,
                },
                authority: trivially,
                sat_radius: trivially,
                amplitude: trivially,
            },
        });
    }

    let noise_gain_value = kf * stats.psi * reach.pinv_norm * reach.control_map_norm;
    let noise_gain_ok = noise_gain_value < 1.0;

    let authority_threshold = if noise_gain_ok {
        kf.sqrt() * c1 * stats.mean_inv_max * reach.pinv_norm * reach.noise_map_norm
            / (1.0 - noise_gain_value)
    } else {
        f64::INFINITY
    };
    let authority_ok = umax > authority_threshold;

    let drift_margin = umax * (1.0 - noise_gain_value)
        - kf.sqrt() * c1 * stats.mean_inv_max * reach.pinv_norm * reach.noise_map_norm;
    let sat_radius = drift_margin
        + kf * (reach.control_map_norm * umax * stats.sigma.sqrt()
            + reach.noise_map_norm * c1 / kf.sqrt());

    let slack = umax * (1.0 + AUTHORITY_SLACK);
    let sat_radius_ok = drift_margin > 0.0 && sat_radius <= slack;
    let amplitude_value = stats.mean_inv_max * reach.pinv_norm * sat_radius;
    let amplitude_ok = amplitude_value <= slack;

    let feasible = noise_gain_ok && authority_ok && sat_radius_ok && amplitude_ok;
    Ok(GeneralPolicyParams {
        kappa,
        umax,
        drift_margin,
        sat_radius,
        mean_inv_stacked,
        psi: stats.psi,
        mean_inv_max: stats.mean_inv_max,
        feasible,
        diagnostics: GeneralDiagnostics {
            noise_gain: Condition {
                value: noise_gain_value,
                bound: 1.0,
                ok: noise_gain_ok,
            },
            authority: Condition {
                value: umax,
                bound: authority_threshold,
                ok: authority_ok,
            },
            sat_radius: Condition {
                value: sat_radius,
                bound: umax,
                ok: sat_radius_ok,
            },
            amplitude: Condition {
                value: amplitude_value,
                bound: umax,
                ok: amplitude_ok,
            },
        },
    })
}

/// Evaluate the burst condition and synthesize `(a, r)`. The drift margin is
/// the largest value the authority admits; infeasibility is data.
pub fn check_burst(
    reach: &ReachabilityData,
    p: f64,
    c1: f64,
    umax: f64,
) -> Result<BurstPolicyParams> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Scenario(format!(
            "burst probability {p} not in (0, 1]"
        )));
    }
    if !umax.is_finite() || umax <= 0.0 || !c1.is_finite() || c1 < 0.0 {
        return Err(Error::Scenario(format!(
            "check_burst needs umax > 0 (got {umax}) and C1 >= 0 (got {c1})"
        )));
    }
    let kappa = reach.kappa;
    if reach.d2 == 0 {
        let trivially = Condition {
            value: 0.0,
            bound: umax,
            ok: true,
        };
        return Ok(BurstPolicyParams {
            kappa,
            umax,
            p,
            drift_margin: 0.0,
            sat_radius: 0.0,
            feasible: true,
            diagnostics: BurstDiagnostics {
                authority: trivially,
                amplitude: trivially,
            },
        });
    }
    let kf = kappa as f64;
    let noise_term = kf.sqrt() * c1 * reach.noise_map_norm / p;
    let authority_threshold = reach.pinv_norm * noise_term;
    let drift_margin = umax / reach.pinv_norm - noise_term;
    let sat_radius = drift_margin + noise_term;
    let amplitude_value = reach.pinv_norm * sat_radius;
    let slack = umax * (1.0 + AUTHORITY_SLACK);
    let feasible = drift_margin > 0.0 && amplitude_value <= slack;
    Ok(BurstPolicyParams {
        kappa,
        umax,
        p,
        drift_margin,
        sat_radius,
        feasible,
        diagnostics: BurstDiagnostics {
            authority: Condition {
                value: umax,
                bound: authority_threshold,
                ok: umax > authority_threshold,
            },
            amplitude: Condition {
                value: amplitude_value,
                bound: umax,
                ok: amplitude_value <= slack,
            },
        },
    })
}

fn check_stacked_norm(stacked: &DVector<f64>, umax: f64) -> Result<()> {
    let norm = stacked.norm();
    if norm > umax * (1.0 + AUTHORITY_SLACK) {
        return Err(Error::AdmissibilityViolation { norm, umax });
    }
    Ok(())
}

/// Stacked window control of the general policy:
/// `-(R+ sat_r(A2^kappa x2)) o inv(mean)`.
pub fn plan_general(
    params: &GeneralPolicyParams,
    reach: &ReachabilityData,
    x2: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !params.feasible {
        return Err(Error::Infeasible(
            "plan_general called with infeasible parameters".into(),
        ));
    }
    if reach.d2 == 0 {
        return Ok(DVector::zeros(params.kappa * reach.m));
    }
    let target = sat(params.sat_radius, &(&reach.a2_pow_kappa * x2));
    let stacked = (-(&reach.control_map_pinv * target)).component_mul(&params.mean_inv_stacked);
    check_stacked_norm(&stacked, params.umax)?;
    Ok(stacked)
}

/// Stacked window control of the burst policy: `-R+ sat_r(A2^kappa x2)`.
pub fn plan_burst(
    params: &BurstPolicyParams,
    reach: &ReachabilityData,
    x2: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !params.feasible {
        return Err(Error::Infeasible(
            "plan_burst called with infeasible parameters".into(),
        ));
    }
    if reach.d2 == 0 {
        return Ok(DVector::zeros(params.kappa * reach.m));
    }
    let target = sat(params.sat_radius, &(&reach.a2_pow_kappa * x2));
    let stacked = -(&reach.control_map_pinv * target);
    check_stacked_norm(&stacked, params.umax)?;
    Ok(stacked)
}

/// Synthesized policy parameters for either channel, or no control at all.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyParams {
    General(GeneralPolicyParams),
    Burst(BurstPolicyParams),
    ZeroControl,
}

impl PolicyParams {
    pub fn kappa(&self) -> Option<usize> {
        match self {
            PolicyParams::General(p) => Some(p.kappa),
            PolicyParams::Burst(p) => Some(p.kappa),
            PolicyParams::ZeroControl => None,
        }
    }

    pub fn feasible(&self) -> bool {
        match self {
            PolicyParams::General(p) => p.feasible,
            PolicyParams::Burst(p) => p.feasible,
            PolicyParams::ZeroControl => true,
        }
    }

    /// Base of the drift level set (`J = r`).
    pub fn drift_level(&self) -> Option<f64> {
        match self {
            PolicyParams::General(p) => Some(p.sat_radius),
            PolicyParams::Burst(p) => Some(p.sat_radius),
            PolicyParams::ZeroControl => None,
        }
    }

    /// Guaranteed expected window decrease of `||x2||` outside the level
    /// set: `-a` for the general policy, `-p a` for the burst policy.
    pub fn drift_threshold(&self) -> Option<f64> {
        match self {
            PolicyParams::General(p) => Some(-p.drift_margin),
            PolicyParams::Burst(p) => Some(-p.p * p.drift_margin),
            PolicyParams::ZeroControl => None,
        }
    }

    fn plan(&self, reach: &ReachabilityData, x2: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            PolicyParams::General(p) => plan_general(p, reach, x2),
            PolicyParams::Burst(p) => plan_burst(p, reach, x2),
            PolicyParams::ZeroControl => Ok(DVector::zeros(reach.kappa * reach.m)),
        }
    }
}

/// Actuator-side controller state: the buffered window controls and the
/// phase inside the window. One instance per simulated trajectory; never
/// shared.
#[derive(Debug, Clone)]
pub struct ControllerState {
    buffer: Vec<DVector<f64>>,
    phase: usize,
    kappa: usize,
    m: usize,
    last_replan_x2: DVector<f64>,
}

impl ControllerState {
    pub fn new(kappa: usize, m: usize, d2: usize) -> Self {
        assert!(kappa >= 1 && m >= 1);
        Self {
            buffer: vec![DVector::zeros(m); kappa],
            phase: 0,
            kappa,
            m,
            last_replan_x2: DVector::zeros(d2),
        }
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    /// Orthogonal state observed at the most recent replanning instant.
    pub fn last_replan_x2(&self) -> &DVector<f64> {
        &self.last_replan_x2
    }

    /// Emit the control for time `t`. At window boundaries (`t mod kappa =
    /// 0`) the buffer is refilled from the current orthogonal state; inside
    /// a window the buffered controls are replayed and the observed state is
    /// ignored.
    pub fn step(
        &mut self,
        params: &PolicyParams,
        reach: &ReachabilityData,
        t: u64,
        x: &crate::model::State,
    ) -> Result<DVector<f64>> {
        let expected = (t % self.kappa as u64) as usize;
        if expected != self.phase {
            return Err(Error::PhaseDesync {
                t,
                phase: self.phase,
            });
        }
        if self.phase == 0 {
            let stacked = params.plan(reach, &x.x2)?;
            debug_assert_eq!(stacked.len(), self.kappa * self.m);
            for (i, block) in self.buffer.iter_mut().enumerate() {
                block.copy_from(&stacked.rows(i * self.m, self.m));
            }
            self.last_replan_x2 = x.x2.clone();
        }
        let u = self.buffer[self.phase].clone();
        self.phase = (self.phase + 1) % self.kappa;
        Ok(u)
    }
}
