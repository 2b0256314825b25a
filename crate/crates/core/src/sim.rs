//! Closed-loop simulation and empirical verification.
//!
//! Trajectories of
//!
//! ```text
//! x' = A x + B (nu o u) + w
//! ```
//!
//! are simulated under a prepared policy, with the channel factor drawn per
//! step (per-component channels) or once per replanning window (burst
//! channels, matching the actuator buffer). On top of the raw trajectories
//! sit four verifiers:
//!
//! * Monte Carlo estimates of `E||x_t||^2` (and of the two parts separately)
//!   with standard errors,
//! * a window-drift probe: the empirical mean change of `||x2||` across one
//!   window, started from states outside the level set, compared against the
//!   synthesized margin,
//! * a fourth-moment probe comparing `E|delta ||x2|| |^4` against its
//!   analytic bound,
//! * a plateau test on the moment series standing in for mean-square
//!   boundedness.
//!
//! Trajectories are independent units of work. They are executed on the
//! current rayon pool in fixed-size chunks and folded in index order, so
//! results are bit-identical for a given master seed regardless of the
//! worker count.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{State, SystemModel, ValidationTolerances};
use crate::noise::{
    channel_stats_with, sample_channel, sample_process, ChannelDraw, ChannelModel, ChannelStats,
    ProcessNoiseModel, StatsOverrides,
};
use crate::policy::{check_burst, check_general, ControllerState, PolicyParams, AUTHORITY_SLACK};
use crate::reachability::{build, ReachabilityData};
use crate::rng::{stream, Purpose};

/// Number of trajectories folded per parallel work item. Fixed so the
/// summation order (chunk by chunk, index order inside a chunk) never
/// depends on thread count.
const FOLD_CHUNK: usize = 32;

/// Which policy a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    General,
    Burst,
    ZeroControl,
}

/// How much of the state history a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Keep every window boundary (every kappa-th step) plus the final step.
    Thinned,
    /// Keep every step.
    Full,
}

/// A complete simulation description.
#[derive(Debug, Clone)]
pub struct SimScenario {
    pub model: SystemModel,
    pub channel: ChannelModel,
    pub process: ProcessNoiseModel,
    pub policy_kind: PolicyKind,
    pub umax: f64,
    pub x0: State,
    pub horizon: u64,
    pub trajectories: usize,
    pub master_seed: u64,
    pub record: RecordMode,
    /// Optional replacements for the analytic channel moments.
    pub stats_overrides: StatsOverrides,
}

/// A scenario with everything derived: validated model, reachability data,
/// channel statistics, and synthesized (feasible) policy parameters.
#[derive(Debug, Clone)]
pub struct PreparedSim {
    pub scenario: SimScenario,
    pub reach: ReachabilityData,
    pub stats: ChannelStats,
    pub params: PolicyParams,
}

/// Validate a scenario, derive reachability data, and synthesize the policy.
/// Fails if the model violates the standing hypotheses, or if the requested
/// policy is infeasible for the given channel/noise/authority.
pub fn prepare(scenario: SimScenario) -> Result<PreparedSim> {
    let report = crate::model::validate(&scenario.model, &ValidationTolerances::default());
    if !report.pass {
        return Err(Error::Scenario(format!(
            "model fails validation: orthogonality residual {:.3e} (ok: {}), \
             Schur decay power {:?} (ok: {}), reachability rank {} (ok: {})",
            report.orthogonality_residual,
            report.orthogonality_ok,
            report.schur_power,
            report.schur_ok,
            report.reach_rank,
            report.reachable,
        )));
    }
    if scenario.channel.m() != scenario.model.m() {
        return Err(Error::Dimension(format!(
            "channel multiplies {} components, plant has m = {}",
            scenario.channel.m(),
            scenario.model.m()
        )));
    }
    if scenario.process.d() != scenario.model.d() {
        return Err(Error::Dimension(format!(
            "process noise has dimension {}, plant has d = {}",
            scenario.process.d(),
            scenario.model.d()
        )));
    }
    if scenario.x0.x1.len() != scenario.model.d1() || scenario.x0.x2.len() != scenario.model.d2() {
        return Err(Error::Dimension(
            "x0 does not match the model partition".into(),
        ));
    }
    let reach = build(&scenario.model)?;
    if scenario.horizon < reach.kappa as u64 {
        return Err(Error::Scenario(format!(
            "horizon {} is shorter than one window (kappa = {})",
            scenario.horizon, reach.kappa
        )));
    }
    if scenario.trajectories == 0 {
        return Err(Error::Scenario("at least one trajectory required".into()));
    }
    let stats = channel_stats_for(&scenario)?;
    let params = match scenario.policy_kind {
        PolicyKind::General => {
            if scenario.channel.is_burst() {
                return Err(Error::Scenario(
                    "the general policy needs a per-component channel".into(),
                ));
            }
            let p = check_general(&reach, &stats, scenario.process.c1, scenario.umax)?;
            if !p.feasible {
                return Err(Error::Infeasible(format!(
                    "general policy infeasible: {:?}",
                    p.diagnostics
                )));
            }
            PolicyParams::General(p)
        }
        PolicyKind::Burst => {
            let p = match &scenario.channel {
                ChannelModel::BurstBernoulli { p, .. } => *p,
                _ => {
                    return Err(Error::Scenario(
                        "the burst policy needs a burst channel".into(),
                    ))
                }
            };
            let b = check_burst(&reach, p, scenario.process.c1, scenario.umax)?;
            if !b.feasible {
                return Err(Error::Infeasible(format!(
                    "burst policy infeasible: {:?}",
                    b.diagnostics
                )));
            }
            PolicyParams::Burst(b)
        }
        PolicyKind::ZeroControl => PolicyParams::ZeroControl,
    };
    Ok(PreparedSim {
        scenario,
        reach,
        stats,
        params,
    })
}

/// Channel statistics for a scenario. A zero-mean component only matters
/// when the mean-inverting general policy is requested; other policies fall
/// back to placeholder ratios so simulation can proceed.
fn channel_stats_for(scenario: &SimScenario) -> Result<ChannelStats> {
    match channel_stats_with(&scenario.channel, &scenario.stats_overrides) {
        Ok(stats) => Ok(stats),
        Err(Error::ZeroMeanComponent { index }) => {
            if scenario.policy_kind == PolicyKind::General {
                Err(Error::ZeroMeanComponent { index })
            } else {
                let mut overrides = scenario.stats_overrides.clone();
                overrides.mu = Some(vec![1.0; scenario.channel.m()]);
                let mut stats = channel_stats_with(&scenario.channel, &overrides)?;
                stats.psi = f64::INFINITY;
                stats.mean_inv_max = f64::INFINITY;
                Ok(stats)
            }
        }
        Err(e) => Err(e),
    }
}

/// One exact closed-loop update: `x1' = A1 x1 + B1 u~ + w1`,
/// `x2' = A2 x2 + B2 u~ + w2`, with `u~` the channel-scaled control.
pub fn step(
    model: &SystemModel,
    x: &State,
    u: &DVector<f64>,
    nu: &ChannelDraw,
    w: &DVector<f64>,
) -> State {
    debug_assert_eq!(u.len(), model.m());
    debug_assert_eq!(w.len(), model.d());
    let realized = match nu {
        ChannelDraw::PerStep(factors) => u.component_mul(factors),
        ChannelDraw::Burst(s) => u * *s,
    };
    let w1 = w.rows(0, model.d1());
    let w2 = w.rows(model.d1(), model.d2());
    State {
        x1: model.a1() * &x.x1 + model.b1() * &realized + w1,
        x2: model.a2() * &x.x2 + model.b2() * &realized + w2,
    }
}

/// One simulated trajectory. States are recorded per [`RecordMode`];
/// controls, realized controls, and channel draws are kept only under
/// [`RecordMode::Full`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<u64>,
    pub states: Vec<State>,
    /// Largest control norm seen between the previous recorded time
    /// (exclusive) and this one (inclusive); 0 for the `t = 0` row.
    pub window_max_control: Vec<f64>,
    pub max_control_norm: f64,
    pub controls: Option<Vec<DVector<f64>>>,
    pub realized_controls: Option<Vec<DVector<f64>>>,
    pub channel_draws: Option<Vec<ChannelDraw>>,
    pub channel_stream_seed: u64,
    pub process_stream_seed: u64,
}

/// Simulate trajectory `index` of the prepared scenario. Deterministic in
/// `(master_seed, index)`.
pub fn run_trajectory(prepared: &PreparedSim, index: u64) -> Result<Trajectory> {
    run_trajectory_streams(prepared, index, Purpose::Channel, Purpose::Process)
}

fn run_trajectory_streams(
    prepared: &PreparedSim,
    index: u64,
    channel_purpose: Purpose,
    process_purpose: Purpose,
) -> Result<Trajectory> {
    let scenario = &prepared.scenario;
    let model = &scenario.model;
    let reach = &prepared.reach;
    let kappa = reach.kappa as u64;
    let horizon = scenario.horizon;
    let full = scenario.record == RecordMode::Full;

    let seed = scenario.master_seed;
    let channel_stream_seed = crate::rng::stream_seed(seed, index, channel_purpose);
    let process_stream_seed = crate::rng::stream_seed(seed, index, process_purpose);
    let mut channel_rng = stream(seed, index, channel_purpose);
    let mut process_rng = stream(seed, index, process_purpose);

    let mut controller = ControllerState::new(reach.kappa, reach.m, reach.d2);
    let mut x = scenario.x0.clone();

    let capacity = if full {
        horizon as usize + 1
    } else {
        (horizon / kappa) as usize + 2
    };
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    let mut window_max_control = Vec::with_capacity(capacity);
    let mut controls = full.then(|| Vec::with_capacity(horizon as usize));
    let mut realized = full.then(|| Vec::with_capacity(horizon as usize));
    let mut draws = full.then(|| Vec::with_capacity(horizon as usize));

    times.push(0);
    states.push(x.clone());
    window_max_control.push(0.0);

    let mut max_control_norm = 0.0f64;
    let mut since_record = 0.0f64;
    let mut burst_draw = ChannelDraw::Burst(1.0);
    let umax_slack = scenario.umax * (1.0 + AUTHORITY_SLACK);

    for t in 0..horizon {
        if scenario.channel.is_burst() && t % kappa == 0 {
            burst_draw = sample_channel(&scenario.channel, &mut channel_rng);
        }
        let u = controller.step(&prepared.params, reach, t, &x)?;
        let u_norm = u.norm();
        if u_norm > umax_slack {
            return Err(Error::AdmissibilityViolation {
                norm: u_norm,
                umax: scenario.umax,
            });
        }
        max_control_norm = max_control_norm.max(u_norm);
        since_record = since_record.max(u_norm);

        let nu = if scenario.channel.is_burst() {
            burst_draw.clone()
        } else {
            sample_channel(&scenario.channel, &mut channel_rng)
        };
        let w = sample_process(&scenario.process, &mut process_rng);
        if let (Some(cs), Some(rs), Some(ds)) = (&mut controls, &mut realized, &mut draws) {
            let r = match &nu {
                ChannelDraw::PerStep(f) => u.component_mul(f),
                ChannelDraw::Burst(s) => &u * *s,
            };
            cs.push(u.clone());
            rs.push(r);
            ds.push(nu.clone());
        }
        x = step(model, &x, &u, &nu, &w);

        let now = t + 1;
        if full || now % kappa == 0 || now == horizon {
            times.push(now);
            states.push(x.clone());
            window_max_control.push(since_record);
            since_record = 0.0;
        }
    }

    Ok(Trajectory {
        times,
        states,
        window_max_control,
        max_control_norm,
        controls,
        realized_controls: realized,
        channel_draws: draws,
        channel_stream_seed,
        process_stream_seed,
    })
}

/// Monte Carlo second-moment series across trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub times: Vec<u64>,
    pub mean_x_sq: Vec<f64>,
    pub se_x_sq: Vec<f64>,
    pub mean_x1_sq: Vec<f64>,
    pub se_x1_sq: Vec<f64>,
    pub mean_x2_sq: Vec<f64>,
    pub se_x2_sq: Vec<f64>,
    /// Per recorded time: largest control norm over all trajectories in the
    /// window ending there.
    pub window_max_control: Vec<f64>,
    /// Largest value of `mean_x_sq` over the series.
    pub max_mean_x_sq: f64,
    /// Largest control norm over every step of every trajectory.
    pub max_control_norm: f64,
    pub trajectories: usize,
}

#[derive(Clone)]
struct MomentAccumulator {
    sum: [Vec<f64>; 3],
    sum_sq: [Vec<f64>; 3],
    window_max: Vec<f64>,
    max_control: f64,
}

impl MomentAccumulator {
    fn new(len: usize) -> Self {
        Self {
            sum: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            sum_sq: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            window_max: vec![0.0; len],
            max_control: 0.0,
        }
    }

    fn add(&mut self, traj: &Trajectory) {
        for (i, s) in traj.states.iter().enumerate() {
            let vals = [
                s.x1.norm_squared() + s.x2.norm_squared(),
                s.x1.norm_squared(),
                s.x2.norm_squared(),
            ];
            for (k, v) in vals.iter().enumerate() {
                self.sum[k][i] += v;
                self.sum_sq[k][i] += v * v;
            }
            self.window_max[i] = self.window_max[i].max(traj.window_max_control[i]);
        }
        self.max_control = self.max_control.max(traj.max_control_norm);
    }

    fn merge(&mut self, other: &MomentAccumulator) {
        for k in 0..3 {
            for i in 0..self.sum[k].len() {
                self.sum[k][i] += other.sum[k][i];
                self.sum_sq[k][i] += other.sum_sq[k][i];
            }
        }
        for i in 0..self.window_max.len() {
            self.window_max[i] = self.window_max[i].max(other.window_max[i]);
        }
        self.max_control = self.max_control.max(other.max_control);
    }
}

/// Estimate the second-moment series over `trajectories` independent runs.
/// Requires at least two trajectories for standard errors.
pub fn monte_carlo_moments(prepared: &PreparedSim) -> Result<MomentSeries> {
    let n = prepared.scenario.trajectories;
    if n < 2 {
        return Err(Error::Scenario(
            "moment estimation needs at least two trajectories".into(),
        ));
    }
    let probe = run_trajectory(prepared, 0)?;
    let len = probe.times.len();
    let times = probe.times.clone();
    drop(probe);

    let indices: Vec<u64> = (0..n as u64).collect();
    let partials: Vec<Result<MomentAccumulator>> = indices
        .par_chunks(FOLD_CHUNK)
        .map(|chunk| {
            let mut acc = MomentAccumulator::new(len);
            for &j in chunk {
                acc.add(&run_trajectory(prepared, j)?);
            }
            Ok(acc)
        })
        .collect();

    let mut total = MomentAccumulator::new(len);
    for partial in partials {
        total.merge(&partial?);
    }

    let nf = n as f64;
    let mut means = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut ses = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for k in 0..3 {
        for i in 0..len {
            let mean = total.sum[k][i] / nf;
            let var = ((total.sum_sq[k][i] - nf * mean * mean) / (nf - 1.0)).max(0.0);
            means[k][i] = mean;
            ses[k][i] = (var / nf).sqrt();
        }
    }
    let max_mean_x_sq = means[0].iter().cloned().fold(0.0f64, f64::max);
    let [mean_x_sq, mean_x1_sq, mean_x2_sq] = means;
    let [se_x_sq, se_x1_sq, se_x2_sq] = ses;
    Ok(MomentSeries {
        times,
        mean_x_sq,
        se_x_sq,
        mean_x1_sq,
        se_x1_sq,
        mean_x2_sq,
        se_x2_sq,
        window_max_control: total.window_max,
        max_mean_x_sq,
        max_control_norm: total.max_control,
        trajectories: n,
    })
}

/// Drift estimate for one probe state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDrift {
    /// `||x2||` of the probe.
    pub probe_norm: f64,
    /// Empirical mean of `||x2 after kappa steps|| - ||x2||`.
    pub estimate: f64,
    pub se: f64,
    pub pass: bool,
}

/// Empirical window-drift report.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// Level below which no drift is claimed (`J = r`).
    pub level: f64,
    /// Required conditional decrease: `-a` (general) or `-p a` (burst).
    pub threshold: f64,
    pub samples: usize,
    pub probes: Vec<ProbeDrift>,
    pub all_pass: bool,
}

/// Estimate the mean one-window change of `||x2||` from each probe state,
/// using fresh noise per sample, and compare against the synthesized
/// threshold (within three standard errors). Probes must lie strictly
/// outside the level set.
pub fn drift_check(
    prepared: &PreparedSim,
    probes: &[DVector<f64>],
    samples: usize,
) -> Result<DriftReport> {
    let threshold = prepared
        .params
        .drift_threshold()
        .ok_or_else(|| Error::Scenario("drift check needs a stabilizing policy".into()))?;
    let level = prepared
        .params
        .drift_level()
        .expect("level exists with threshold");
    if samples == 0 {
        return Err(Error::Scenario("drift check needs samples >= 1".into()));
    }
    let mut rows = Vec::with_capacity(probes.len());
    let mut all_pass = true;
    for (pi, probe) in probes.iter().enumerate() {
        let norm = probe.norm();
        if norm <= level {
            return Err(Error::ProbeInsideLevelSet { norm, j: level });
        }
        let (mean, se) = window_delta_moments(
            prepared,
            probe,
            samples,
            pi,
            Purpose::DriftChannel,
            Purpose::DriftProcess,
            1,
        )?;
        let pass = mean <= threshold + 3.0 * se;
        all_pass &= pass;
        rows.push(ProbeDrift {
            probe_norm: norm,
            estimate: mean,
            se,
            pass,
        });
    }
    Ok(DriftReport {
        level,
        threshold,
        samples,
        probes: rows,
        all_pass,
    })
}

/// Fourth-moment estimate for one probe state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFourthMoment {
    pub probe_norm: f64,
    /// Empirical `E |delta ||x2|| |^4` over one window.
    pub estimate: f64,
    pub se: f64,
}

/// Empirical fourth-moment report against the analytic window bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FourthMomentReport {
    pub probes: Vec<ProbeFourthMoment>,
    pub max_estimate: f64,
    /// `kappa^4 (sqrt(m) Umax diam(T) |R| + |R_I| C1)^4`.
    pub bound: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Analytic bound on `E |delta ||x2|| |^4` per window.
pub fn fourth_moment_bound(prepared: &PreparedSim) -> f64 {
    let reach = &prepared.reach;
    let kf = reach.kappa as f64;
    let mf = reach.m as f64;
    kf.powi(4)
        * (mf.sqrt()
            * prepared.scenario.umax
            * prepared.stats.diam_support
            * reach.control_map_norm
            + reach.noise_map_norm * prepared.scenario.process.c1)
            .powi(4)
}

/// Estimate `E |delta ||x2|| |^4` over one window from each probe (probes
/// may be anywhere) and compare the worst case against the analytic bound.
pub fn fourth_moment_check(
    prepared: &PreparedSim,
    probes: &[DVector<f64>],
    samples: usize,
) -> Result<FourthMomentReport> {
    if samples == 0 {
        return Err(Error::Scenario(
            "fourth-moment check needs samples >= 1".into(),
        ));
    }
    let bound = fourth_moment_bound(prepared);
    let mut rows = Vec::with_capacity(probes.len());
    let mut max_estimate = 0.0f64;
    for (pi, probe) in probes.iter().enumerate() {
        let (mean, se) = window_delta_moments(
            prepared,
            probe,
            samples,
            pi,
            Purpose::FourthChannel,
            Purpose::FourthProcess,
            4,
        )?;
        max_estimate = max_estimate.max(mean);
        rows.push(ProbeFourthMoment {
            probe_norm: probe.norm(),
            estimate: mean,
            se,
        });
    }
    Ok(FourthMomentReport {
        probes: rows,
        max_estimate,
        bound,
        samples,
        pass: max_estimate <= bound,
    })
}

/// Mean and standard error of `g(delta)` over `samples` one-window rollouts
/// from `x2`, where `delta = ||x2 after kappa steps|| - ||x2||` and `g` is
/// `delta` itself (`power = 1`) or `|delta|^4` (`power = 4`). Rollouts for
/// probe `pi`, sample `s` use stream index `pi * samples + s`, so probes and
/// samples are mutually independent and reproducible.
fn window_delta_moments(
    prepared: &PreparedSim,
    x2: &DVector<f64>,
    samples: usize,
    pi: usize,
    channel_purpose: Purpose,
    process_purpose: Purpose,
    power: i32,
) -> Result<(f64, f64)> {
    if x2.len() != prepared.reach.d2 {
        return Err(Error::Dimension(format!(
            "probe has dimension {}, plant has d2 = {}",
            x2.len(),
            prepared.reach.d2
        )));
    }
    let window = PreparedSim {
        scenario: SimScenario {
            x0: State {
                x1: DVector::zeros(prepared.scenario.model.d1()),
                x2: x2.clone(),
            },
            horizon: prepared.reach.kappa as u64,
            record: RecordMode::Thinned,
            ..prepared.scenario.clone()
        },
        reach: prepared.reach.clone(),
        stats: prepared.stats.clone(),
        params: prepared.params.clone(),
    };
    let base_norm = x2.norm();

    let indices: Vec<u64> = (0..samples as u64).collect();
    let partials: Vec<Result<(f64, f64)>> = indices
        .par_chunks(FOLD_CHUNK)
        .map(|chunk| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for &s in chunk {
                let idx = pi as u64 * samples as u64 + s;
                let traj = run_trajectory_streams(&window, idx, channel_purpose, process_purpose)?;
                let final_norm = traj.states.last().expect("recorded").x2.norm();
                let delta = final_norm - base_norm;
                let g = if power == 1 {
                    delta
                } else {
                    delta.abs().powi(power)
                };
                sum += g;
                sum_sq += g * g;
            }
            Ok((sum, sum_sq))
        })
        .collect();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for partial in partials {
        let (s, q) = partial?;
        sum += s;
        sum_sq += q;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let se = if samples > 1 {
        (((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) / nf).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((mean, se))
}

/// Outcome of the plateau test.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessVerdict {
    pub pass: bool,
    /// Empirical stand-in for the mean-square bound: the largest mean
    /// `||x||^2` seen anywhere in the series.
    pub zeta_hat: f64,
    /// Largest mean over the reference window.
    pub reference_max: f64,
    /// Largest mean over the final window.
    pub final_max: f64,
    pub ratio_limit: f64,
}

/// Headroom the final window is allowed over the reference window.
pub const PLATEAU_RATIO: f64 = 1.10;

/// Plateau test on the moment series: PASS when the largest mean `||x||^2`
/// over the final stretch stays within [`PLATEAU_RATIO`] times the largest
/// over an earlier reference stretch, and the series is finite everywhere.
///
/// With `burn_in` = 0.5 the reference window is the second quarter of the
/// horizon and the final window is the last quarter; other burn-in fractions
/// scale the windows proportionally (reference `[burn/2 H, burn H)`, final
/// `[(1 + burn)/2 H, H]`).
pub fn boundedness_verdict(series: &MomentSeries, burn_in: f64) -> Result<BoundednessVerdict> {
    if !(0.0..1.0).contains(&burn_in) || burn_in <= 0.0 {
        return Err(Error::Scenario(format!(
            "burn-in fraction {burn_in} not in (0, 1)"
        )));
    }
    let horizon = *series
        .times
        .last()
        .ok_or_else(|| Error::Scenario("moment series is empty".into()))? as f64;
    let ref_lo = burn_in / 2.0 * horizon;
    let ref_hi = burn_in * horizon;
    let fin_lo = (1.0 + burn_in) / 2.0 * horizon;
    let mut reference_max: Option<f64> = None;
    let mut final_max: Option<f64> = None;
    let mut zeta_hat = 0.0f64;
    let mut finite = true;
    for (i, &t) in series.times.iter().enumerate() {
        let v = series.mean_x_sq[i];
        finite &= v.is_finite();
        zeta_hat = zeta_hat.max(v);
        let tf = t as f64;
        if tf >= ref_lo && tf < ref_hi {
            reference_max = Some(reference_max.map_or(v, |m: f64| m.max(v)));
        }
        if tf >= fin_lo {
            final_max = Some(final_max.map_or(v, |m: f64| m.max(v)));
        }
    }
    let reference_max = reference_max
        .ok_or_else(|| Error::Scenario("horizon too short: empty reference window".into()))?;
    let final_max =
        final_max.ok_or_else(|| Error::Scenario("horizon too short: empty final window".into()))?;
    let pass = finite && final_max <= PLATEAU_RATIO * reference_max;
    Ok(BoundednessVerdict {
        pass,
        zeta_hat,
        reference_max,
        final_max,
        ratio_limit: PLATEAU_RATIO,
    })
}

/// Deterministic unit direction used to place probe states, derived from
/// the scenario's master seed.
pub fn probe_direction(prepared: &PreparedSim) -> Result<DVector<f64>> {
    let d2 = prepared.reach.d2;
    if d2 == 0 {
        return Err(Error::Scenario(
            "probes need an orthogonal part (d2 >= 1)".into(),
        ));
    }
    let mut rng = stream(prepared.scenario.master_seed, 0, Purpose::ProbeDirection);
    Ok(loop {
        let v = DVector::from_fn(d2, |_, _| {
            use rand::Rng;
            rng.random::<f64>() - 0.5
        });
        let n = v.norm();
        if n > 1e-3 {
            break v / n;
        }
    })
}

/// Default probe states for drift and fourth-moment checks: one
/// deterministic direction scaled to `{2, 10, 100}` times the level `J`.
pub fn default_probes(prepared: &PreparedSim) -> Result<Vec<DVector<f64>>> {
    let level = prepared
        .params
        .drift_level()
        .ok_or_else(|| Error::Scenario("probes need a stabilizing policy".into()))?;
    if prepared.reach.d2 == 0 {
        return Ok(Vec::new());
    }
    let direction = probe_direction(prepared)?;
    Ok([2.0, 10.0, 100.0]
        .iter()
        .map(|mult| &direction * (mult * level))
        .collect())
}
