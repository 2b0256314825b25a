//! Scenario files: the JSON schema, its mapping onto core types, and the
//! provenance hash.
//!
//! Matrices are row-major nested arrays; angles are radians. Unknown keys
//! are rejected everywhere. `sim.horizon`, `sim.trajectories`, and
//! `sim.record` may be omitted and fall back to the documented defaults.

use msb_core::nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use msb_core::model::{OrthBlock, State, SystemModel};
use msb_core::noise::{
    ChannelModel, ComponentDist, ProcessNoise, ProcessNoiseModel, StatsOverrides,
};
use msb_core::sim::{PolicyKind, RecordMode, SimScenario};

use crate::defaults;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub process: ProcessSection,
    pub policy: PolicySection,
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub d1: usize,
    #[serde(rename = "A1")]
    pub a1: Vec<Vec<f64>>,
    pub blocks: Vec<BlockSpec>,
    #[serde(rename = "B1")]
    pub b1: Vec<Vec<f64>>,
    #[serde(rename = "B2")]
    pub b2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum BlockSpec {
    PlusOne,
    MinusOne,
    Rotation { theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "variant")]
pub enum ChannelSection {
    PerComponentIid {
        components: Vec<ComponentSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        overrides: Option<OverridesSpec>,
    },
    BurstBernoulli {
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "dist")]
pub enum ComponentSpec {
    PointMass { v: f64 },
    TwoPoint { v0: f64, v1: f64, p1: f64 },
    UniformInterval { lo: f64, hi: f64 },
    DiscreteSet { values: Vec<f64>, probs: Vec<f64> },
}

/// Optional replacements for the analytic channel moments (for channels
/// with dependent components).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diam: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "variant")]
pub enum ProcessSection {
    ZeroNoise,
    IsotropicUniform {
        halfwidth: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c4: Option<f64>,
    },
    Gaussian {
        std: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c4: Option<f64>,
    },
    DiscreteSet {
        values: Vec<Vec<f64>>,
        probs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c4: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyKindSpec,
    pub umax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKindSpec {
    General,
    Burst,
    ZeroControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<RecordSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSpec {
    Thinned,
    Full,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let scenario = Self::parse(&text)?;
        Ok((scenario, sha256_hex(text.as_bytes())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Build the core scenario, applying defaults and an optional seed
    /// override.
    pub fn to_sim_scenario(&self, seed_override: Option<u64>) -> Result<SimScenario, CliError> {
        let model = self.build_model()?;
        let channel = self.build_channel(&model)?;
        let stats_overrides = self.build_overrides();
        let process = self.build_process(&model)?;
        let policy_kind = match self.policy.kind {
            PolicyKindSpec::General => PolicyKind::General,
            PolicyKindSpec::Burst => PolicyKind::Burst,
            PolicyKindSpec::ZeroControl => PolicyKind::ZeroControl,
        };
        if self.policy.umax < 0.0
            || (self.policy.umax == 0.0 && policy_kind != PolicyKind::ZeroControl)
        {
            return Err(CliError::Scenario(format!(
                "umax {} must be positive for a stabilizing policy",
                self.policy.umax
            )));
        }
        let x0 = State::from_concat(&model, &DVector::from_vec(self.sim.x0.clone()))
            .map_err(CliError::Core)?;
        let horizon = match self.sim.horizon {
            Some(h) => h,
            None => {
                let reach = msb_core::reachability::build(&model).map_err(CliError::Core)?;
                defaults::HORIZON_WINDOWS * reach.kappa as u64
            }
        };
        Ok(SimScenario {
            model,
            channel,
            process,
            policy_kind,
            umax: self.policy.umax,
            x0,
            horizon,
            trajectories: self.sim.trajectories.unwrap_or(defaults::TRAJECTORIES),
            master_seed: seed_override.unwrap_or(self.sim.seed),
            record: match self.sim.record.unwrap_or(RecordSpec::Thinned) {
                RecordSpec::Thinned => RecordMode::Thinned,
                RecordSpec::Full => RecordMode::Full,
            },
            stats_overrides,
        })
    }

    fn build_model(&self) -> Result<SystemModel, CliError> {
        let sys = &self.system;
        let a1 = matrix_from_rows(&sys.a1, sys.d1, sys.d1, "A1")?;
        let blocks: Vec<OrthBlock> = sys
            .blocks
            .iter()
            .map(|b| match *b {
                BlockSpec::PlusOne => OrthBlock::PlusOne,
                BlockSpec::MinusOne => OrthBlock::MinusOne,
                BlockSpec::Rotation { theta } => OrthBlock::Rotation { theta },
            })
            .collect();
        let d2: usize = blocks.iter().map(OrthBlock::dim).sum();
        let m = if d2 > 0 {
            width_of(&sys.b2, "B2")?
        } else {
            width_of(&sys.b1, "B1")?
        };
        let b1 = matrix_from_rows(&sys.b1, sys.d1, m, "B1")?;
        let b2 = matrix_from_rows(&sys.b2, d2, m, "B2")?;
        SystemModel::new(a1, blocks, b1, b2).map_err(CliError::Core)
    }

    fn build_channel(&self, model: &SystemModel) -> Result<ChannelModel, CliError> {
        let channel = match &self.channel {
            ChannelSection::PerComponentIid { components, .. } => ChannelModel::PerComponentIID {
                components: components
                    .iter()
                    .map(|c| match c {
                        ComponentSpec::PointMass { v } => ComponentDist::PointMass { v: *v },
                        ComponentSpec::TwoPoint { v0, v1, p1 } => ComponentDist::TwoPoint {
                            v0: *v0,
                            v1: *v1,
                            p1: *p1,
                        },
                        ComponentSpec::UniformInterval { lo, hi } => {
                            ComponentDist::UniformInterval { lo: *lo, hi: *hi }
                        }
                        ComponentSpec::DiscreteSet { values, probs } => {
                            ComponentDist::DiscreteSet {
                                values: values.clone(),
                                probs: probs.clone(),
                            }
                        }
                    })
                    .collect(),
            },
            ChannelSection::BurstBernoulli { p } => ChannelModel::BurstBernoulli {
                p: *p,
                m: model.m(),
            },
        };
        channel.check().map_err(CliError::Core)?;
        Ok(channel)
    }

    fn build_overrides(&self) -> StatsOverrides {
        match &self.channel {
            ChannelSection::PerComponentIid {
                overrides: Some(o), ..
            } => StatsOverrides {
                mu: o.mu.clone(),
                sigma: o.sigma,
                diam_support: o.diam,
            },
            _ => StatsOverrides::default(),
        }
    }

    fn build_process(&self, model: &SystemModel) -> Result<ProcessNoiseModel, CliError> {
        let (variant, c1, c4) = match &self.process {
            ProcessSection::ZeroNoise => (ProcessNoise::Zero, None, None),
            ProcessSection::IsotropicUniform { halfwidth, c1, c4 } => (
                ProcessNoise::IsotropicUniform {
                    halfwidth: *halfwidth,
                },
                *c1,
                *c4,
            ),
            ProcessSection::Gaussian { std, c1, c4 } => {
                (ProcessNoise::Gaussian { std: *std }, *c1, *c4)
            }
            ProcessSection::DiscreteSet {
                values,
                probs,
                c1,
                c4,
            } => (
                ProcessNoise::DiscreteSet {
                    values: values.clone(),
                    probs: probs.clone(),
                },
                *c1,
                *c4,
            ),
        };
        ProcessNoiseModel::with_overrides(variant, model.d1(), model.d2(), c1, c4)
            .map_err(CliError::Core)
    }
}

fn width_of(rows: &[Vec<f64>], name: &str) -> Result<usize, CliError> {
    match rows.first() {
        Some(row) if !row.is_empty() => Ok(row.len()),
        _ => Err(CliError::Scenario(format!(
            "{name} must have at least one nonempty row to define the input dimension"
        ))),
    }
}

fn matrix_from_rows(
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
    name: &str,
) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != nrows {
        return Err(CliError::Scenario(format!(
            "{name} has {} rows, expected {nrows}",
            rows.len()
        )));
    }
    let mut flat = Vec::with_capacity(nrows * ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(CliError::Scenario(format!(
                "{name} row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
        flat.extend_from_slice(row);
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The bundled scalar burst scenario.
pub const EXAMPLE1_JSON: &str = include_str!("../scenarios/example1.json");
/// Quarter-turn rotation plant with a general per-component channel.
pub const ROTATION_GENERAL_JSON: &str = include_str!("../scenarios/rotation_general.json");
/// Quarter-turn rotation plant with no control, for growth detection.
pub const ROTATION_ZERO_CONTROL_JSON: &str =
    include_str!("../scenarios/rotation_zero_control.json");

/// All bundled scenarios by name.
pub fn bundled() -> Vec<(&'static str, &'static str)> {
    vec![
        ("example1", EXAMPLE1_JSON),
        ("rotation_general", ROTATION_GENERAL_JSON),
        ("rotation_zero_control", ROTATION_ZERO_CONTROL_JSON),
    ]
}
