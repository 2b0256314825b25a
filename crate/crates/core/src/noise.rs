//! Channel and process noise models, their analytic moments, and samplers.
//!
//! The control channel acts multiplicatively on the control vector. Two
//! families are supported: independent bounded per-component factors, and a
//! single Bernoulli factor applied to a whole transmission burst. The
//! additive process noise only needs a finite fourth moment, so unbounded
//! (Gaussian) variants are allowed there.
//!
//! Statistics exposed here feed the feasibility formulas: the channel mean
//! and total variance, the noise-to-signal ratio `psi = sqrt(sigma) *
//! max_i |mu_i|^-1`, the support diameter, and the `C1 >= E||w||`,
//! `C4 >= E||w||^4` bounds. Analytic values are used where a closed form
//! exists; otherwise `C1` falls back to the Jensen bound `C4^(1/4)`.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A bounded scalar distribution for one channel component.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentDist {
    /// Always `v`.
    PointMass { v: f64 },
    /// `v1` with probability `p1`, else `v0`.
    TwoPoint { v0: f64, v1: f64, p1: f64 },
    /// Uniform on `[lo, hi]`.
    UniformInterval { lo: f64, hi: f64 },
    /// Finite support with explicit probabilities.
    DiscreteSet { values: Vec<f64>, probs: Vec<f64> },
}

impl ComponentDist {
    fn check(&self) -> Result<()> {
        let scenario = |msg: String| Err(Error::Scenario(msg));
        match self {
            ComponentDist::PointMass { v } => {
                if !v.is_finite() {
                    return scenario("point mass value must be finite".into());
                }
            }
            ComponentDist::TwoPoint { v0, v1, p1 } => {
                if !v0.is_finite() || !v1.is_finite() {
                    return scenario("two-point values must be finite".into());
                }
                if !(0.0..=1.0).contains(p1) {
                    return scenario(format!("two-point probability {p1} not in [0, 1]"));
                }
            }
            ComponentDist::UniformInterval { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return scenario(format!("uniform interval [{lo}, {hi}] is invalid"));
                }
            }
            ComponentDist::DiscreteSet { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return scenario("discrete set needs matching nonempty values/probs".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return scenario("discrete set values must be finite".into());
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return scenario("discrete set probabilities must be nonnegative".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return scenario(format!("discrete set probabilities sum to {total}"));
                }
            }
        }
        Ok(())
    }

    fn mean(&self) -> f64 {
        match self {
            ComponentDist::PointMass { v } => *v,
            ComponentDist::TwoPoint { v0, v1, p1 } => v0 * (1.0 - p1) + v1 * p1,
            ComponentDist::UniformInterval { lo, hi } => 0.5 * (lo + hi),
            ComponentDist::DiscreteSet { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    fn variance(&self) -> f64 {
        match self {
            ComponentDist::PointMass { .. } => 0.0,
            ComponentDist::TwoPoint { v0, v1, p1 } => (v1 - v0).powi(2) * p1 * (1.0 - p1),
            ComponentDist::UniformInterval { lo, hi } => (hi - lo).powi(2) / 12.0,
            ComponentDist::DiscreteSet { values, probs } => {
                let mean = self.mean();
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| (v - mean).powi(2) * p)
                    .sum()
            }
        }
    }

    /// Width of the support interval.
    fn support_width(&self) -> f64 {
        let (lo, hi) = self.support_bounds();
        hi - lo
    }

    fn support_bounds(&self) -> (f64, f64) {
        match self {
            ComponentDist::PointMass { v } => (*v, *v),
            ComponentDist::TwoPoint { v0, v1, .. } => (v0.min(*v1), v0.max(*v1)),
            ComponentDist::UniformInterval { lo, hi } => (*lo, *hi),
            ComponentDist::DiscreteSet { values, .. } => {
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ComponentDist::PointMass { v } => *v,
            ComponentDist::TwoPoint { v0, v1, p1 } => {
                if rng.random::<f64>() < *p1 {
                    *v1
                } else {
                    *v0
                }
            }
            ComponentDist::UniformInterval { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ComponentDist::DiscreteSet { values, probs } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("nonempty by construction")
            }
        }
    }
}

/// Multiplicative control-channel model.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Independent bounded factors, one per control component, redrawn every
    /// step.
    PerComponentIID { components: Vec<ComponentDist> },
    /// One Bernoulli factor in {0, 1} drawn per transmission burst and
    /// applied to every control of that burst. `m` is the control dimension
    /// the factor multiplies.
    BurstBernoulli { p: f64, m: usize },
}

impl ChannelModel {
    pub fn check(&self) -> Result<()> {
        match self {
            ChannelModel::PerComponentIID { components } => {
                if components.is_empty() {
                    return Err(Error::Scenario(
                        "channel needs at least one component".into(),
                    ));
                }
                for c in components {
                    c.check()?;
                }
                Ok(())
            }
            ChannelModel::BurstBernoulli { p, m } => {
                // p = 1 is the lossless limit; p = 0 never transmits and is
                // rejected.
                if !p.is_finite() || *p <= 0.0 || *p > 1.0 {
                    return Err(Error::Scenario(format!(
                        "burst probability {p} not in (0, 1]"
                    )));
                }
                if *m == 0 {
                    return Err(Error::Scenario("burst channel needs m >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Control dimension the channel multiplies.
    pub fn m(&self) -> usize {
        match self {
            ChannelModel::PerComponentIID { components } => components.len(),
            ChannelModel::BurstBernoulli { m, .. } => *m,
        }
    }

    pub fn is_burst(&self) -> bool {
        matches!(self, ChannelModel::BurstBernoulli { .. })
    }
}

/// One realized channel factor.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelDraw {
    /// Per-component factors for one step.
    PerStep(DVector<f64>),
    /// Scalar burst factor applied to every control of the current window.
    Burst(f64),
}

/// Analytic channel moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    /// Component-wise mean of the channel factor.
    pub mu: DVector<f64>,
    /// Total second central moment `E||nu - mu||^2`.
    pub sigma: f64,
    /// Noise-to-signal ratio `sqrt(sigma) * max_i |mu_i|^-1`.
    pub psi: f64,
    /// `max_i |mu_i|^-1`.
    pub mean_inv_max: f64,
    /// Euclidean diameter of the support box.
    pub diam_support: f64,
}

/// Optional user-supplied replacements for the analytic channel moments,
/// for channels whose components are not mutually independent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsOverrides {
    pub mu: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub diam_support: Option<f64>,
}

/// Analytic moments of a channel model. Fails with [`Error::ZeroMeanComponent`]
/// when some mean entry is zero, since the mean-inverting general policy is
/// undefined there.
pub fn channel_stats(channel: &ChannelModel) -> Result<ChannelStats> {
    channel_stats_with(channel, &StatsOverrides::default())
}

/// [`channel_stats`] with selective overrides applied before the derived
/// quantities (`psi`, `mean_inv_max`) are computed.
pub fn channel_stats_with(
    channel: &ChannelModel,
    overrides: &StatsOverrides,
) -> Result<ChannelStats> {
    channel.check()?;
    let (mut mu, mut sigma, mut diam) = match channel {
        ChannelModel::PerComponentIID { components } => {
            let mu = DVector::from_iterator(components.len(), components.iter().map(|c| c.mean()));
            let sigma: f64 = components.iter().map(|c| c.variance()).sum();
            let diam_sq: f64 = components.iter().map(|c| c.support_width().powi(2)).sum();
            (mu, sigma, diam_sq.sqrt())
        }
        ChannelModel::BurstBernoulli { p, m } => {
            let mu = DVector::from_element(*m, *p);
            let sigma = *m as f64 * p * (1.0 - p);
            // Support is {0, ones}; the diameter is ||ones|| = sqrt(m).
            (mu, sigma, (*m as f64).sqrt())
        }
    };
    if let Some(mu_over) = &overrides.mu {
        if mu_over.len() != mu.len() {
            return Err(Error::Dimension(format!(
                "mu override has length {}, expected {}",
                mu_over.len(),
                mu.len()
            )));
        }
        mu = DVector::from_vec(mu_over.clone());
    }
    if let Some(s) = overrides.sigma {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Scenario(format!("sigma override {s} invalid")));
        }
        sigma = s;
    }
    if let Some(d) = overrides.diam_support {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::Scenario(format!("diameter override {d} invalid")));
        }
        diam = d;
    }
    let mut mean_inv_max = 0.0f64;
    for (i, &mi) in mu.iter().enumerate() {
        if mi == 0.0 {
            return Err(Error::ZeroMeanComponent { index: i });
        }
        mean_inv_max = mean_inv_max.max(mi.abs().recip());
    }
    Ok(ChannelStats {
        mu,
        sigma,
        psi: sigma.sqrt() * mean_inv_max,
        mean_inv_max,
        diam_support: diam,
    })
}

/// Draw one channel realization: a per-component vector, or the scalar burst
/// factor. Every draw is asserted to lie in the declared support.
pub fn sample_channel(channel: &ChannelModel, rng: &mut ChaCha8Rng) -> ChannelDraw {
    match channel {
        ChannelModel::PerComponentIID { components } => {
            let draw = DVector::from_iterator(
                components.len(),
                components.iter().map(|c| {
                    let v = c.sample(rng);
                    let (lo, hi) = c.support_bounds();
                    assert!(
                        v >= lo && v <= hi,
                        "channel draw {v} outside declared support [{lo}, {hi}]"
                    );
                    v
                }),
            );
            ChannelDraw::PerStep(draw)
        }
        ChannelModel::BurstBernoulli { p, .. } => {
            let v = if rng.random::<f64>() < *p { 1.0 } else { 0.0 };
            ChannelDraw::Burst(v)
        }
    }
}

/// Additive process-noise distribution, i.i.d. across time and coordinates
/// as declared.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessNoise {
    Zero,
    /// Each coordinate uniform on `[-halfwidth, halfwidth]`, independently.
    IsotropicUniform {
        halfwidth: f64,
    },
    /// Each coordinate `N(0, std^2)`, independently.
    Gaussian {
        std: f64,
    },
    /// Finite set of full-dimension vectors with explicit probabilities.
    DiscreteSet {
        values: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
}

/// Process-noise model over the full state dimension, carrying the moment
/// bounds `C1 >= E||w||` and `C4 >= E||w||^4` used by the feasibility
/// formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessNoiseModel {
    pub variant: ProcessNoise,
    pub d1: usize,
    pub d2: usize,
    pub c1: f64,
    pub c4: f64,
}

impl ProcessNoiseModel {
    /// Build a model with analytic `C1`/`C4`.
    pub fn new(variant: ProcessNoise, d1: usize, d2: usize) -> Result<Self> {
        Self::with_overrides(variant, d1, d2, None, None)
    }

    /// Build a model, optionally overriding the derived bounds (the override
    /// must still be a valid upper bound for the declared distribution; that
    /// is the caller's responsibility).
    pub fn with_overrides(
        variant: ProcessNoise,
        d1: usize,
        d2: usize,
        c1_override: Option<f64>,
        c4_override: Option<f64>,
    ) -> Result<Self> {
        let d = d1 + d2;
        match &variant {
            ProcessNoise::Zero => {}
            ProcessNoise::IsotropicUniform { halfwidth } => {
                if !halfwidth.is_finite() || *halfwidth < 0.0 {
                    return Err(Error::Scenario(format!("halfwidth {halfwidth} invalid")));
                }
            }
            ProcessNoise::Gaussian { std } => {
                if !std.is_finite() || *std < 0.0 {
                    return Err(Error::Scenario(format!("std {std} invalid")));
                }
            }
            ProcessNoise::DiscreteSet { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::Scenario(
                        "discrete process noise needs matching values/probs".into(),
                    ));
                }
                if values.iter().any(|v| v.len() != d) {
                    return Err(Error::Dimension(format!(
                        "discrete process noise vectors must have length {d}"
                    )));
                }
                let total: f64 = probs.iter().sum();
                if probs.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Scenario(
                        "discrete process noise probabilities invalid".into(),
                    ));
                }
            }
        }
        let (c1_analytic, c4_analytic) = analytic_bounds(&variant, d);
        let c1 = c1_override.unwrap_or(c1_analytic);
        let c4 = c4_override.unwrap_or(c4_analytic);
        if !c1.is_finite() || !c4.is_finite() || c1 < 0.0 || c4 < 0.0 {
            return Err(Error::Scenario(
                "C1/C4 bounds must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            variant,
            d1,
            d2,
            c1,
            c4,
        })
    }

    pub fn d(&self) -> usize {
        self.d1 + self.d2
    }
}

/// `(C1, C4)` for a built-in variant in dimension `d`.
///
/// `C4` is always analytic. `C1` is analytic where a closed form exists:
/// uniform in one dimension (`h/2`) and Gaussian in any dimension (the chi
/// mean `std * sqrt(2) * Gamma((d+1)/2) / Gamma(d/2)`). Otherwise the Jensen
/// bound `C4^(1/4)` is used.
pub fn process_bounds(variant: &ProcessNoise, d: usize) -> (f64, f64) {
    analytic_bounds(variant, d)
}

fn analytic_bounds(variant: &ProcessNoise, d: usize) -> (f64, f64) {
    match variant {
        ProcessNoise::Zero => (0.0, 0.0),
        ProcessNoise::IsotropicUniform { halfwidth } => {
            let h = *halfwidth;
            let df = d as f64;
            // E w_i^4 = h^4/5 and E w_i^2 = h^2/3 per coordinate.
            let c4 = df * h.powi(4) / 5.0 + df * (df - 1.0) * (h * h / 3.0).powi(2);
            let c1 = if d == 1 { 0.5 * h } else { c4.powf(0.25) };
            (c1, c4)
        }
        ProcessNoise::Gaussian { std } => {
            let df = d as f64;
            // ||w||^2 / std^2 is chi-squared with d degrees of freedom.
            let c4 = std.powi(4) * df * (df + 2.0);
            let c1 = std * std::f64::consts::SQRT_2 * gamma_half_ratio(d);
            (c1, c4)
        }
        ProcessNoise::DiscreteSet { values, probs } => {
            let mut c1 = 0.0;
            let mut c4 = 0.0;
            for (v, p) in values.iter().zip(probs) {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                c1 += p * norm;
                c4 += p * norm.powi(4);
            }
            (c1, c4)
        }
    }
}

/// `Gamma((d+1)/2) / Gamma(d/2)` by the recurrence
/// `g(d+2) = g(d) * (d+1)/d`, anchored at `g(1) = 1/sqrt(pi)` and
/// `g(2) = sqrt(pi)/2`.
fn gamma_half_ratio(d: usize) -> f64 {
    assert!(d >= 1);
    let mut value = if d % 2 == 1 {
        1.0 / std::f64::consts::PI.sqrt()
    } else {
        std::f64::consts::PI.sqrt() / 2.0
    };
    let mut k = if d % 2 == 1 { 1 } else { 2 };
    while k + 2 <= d {
        value *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    value
}

/// Draw one process-noise vector of full dimension `d1 + d2`.
pub fn sample_process(pm: &ProcessNoiseModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let d = pm.d();
    match &pm.variant {
        ProcessNoise::Zero => DVector::zeros(d),
        ProcessNoise::IsotropicUniform { halfwidth } => {
            let h = *halfwidth;
            DVector::from_fn(d, |_, _| h * (2.0 * rng.random::<f64>() - 1.0))
        }
        ProcessNoise::Gaussian { std } => {
            let s = *std;
            DVector::from_fn(d, |_, _| s * rng.sample::<f64, _>(StandardNormal))
        }
        ProcessNoise::DiscreteSet { values, probs } => {
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            for (v, p) in values.iter().zip(probs) {
                acc += p;
                if u < acc {
                    return DVector::from_vec(v.clone());
                }
            }
            DVector::from_vec(values.last().expect("nonempty").clone())
        }
    }
}
