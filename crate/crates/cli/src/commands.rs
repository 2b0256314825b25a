//! Command implementations. Each command returns a structured outcome with
//! its exit code; human-readable text goes to stdout, machine-readable
//! results go to files, and the exit code is the only success/failure
//! contract.

use std::path::{Path, PathBuf};

use msb_core::noise::channel_stats_with;
use msb_core::policy::{check_burst, check_general, PolicyParams};
use msb_core::reachability::build;
use msb_core::sim::{
    boundedness_verdict, default_probes, drift_check, monte_carlo_moments, prepare,
    probe_direction, BoundednessVerdict, DriftReport, MomentSeries, PolicyKind, PreparedSim,
    SimScenario,
};

use crate::error::{CliError, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_OK};
use crate::output::{drift_csv, moments_csv, remove_files, verdict_json, write_file};
use crate::scenario::{sha256_hex, ChannelSection, ScenarioFile, EXAMPLE1_JSON};
use crate::{defaults, MIN_DRIFT_SAMPLES};

/// Everything the feasibility report prints.
#[derive(Debug, Clone)]
pub struct FeasibilityInfo {
    pub kappa: usize,
    pub control_map_norm: f64,
    pub pinv_norm: f64,
    pub noise_map_norm: f64,
    pub c1: f64,
    pub c4: f64,
    pub umax: f64,
    pub params: PolicyParams,
}

impl FeasibilityInfo {
    pub fn feasible(&self) -> bool {
        self.params.feasible()
    }

    /// Human-readable report.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "kappa = {}   |R| = {:.9}   |R+| = {:.9}   |R_I| = {:.9}\n",
            self.kappa, self.control_map_norm, self.pinv_norm, self.noise_map_norm
        ));
        out.push_str(&format!(
            "C1 = {:.9}   C4 = {:.9}   Umax = {}\n",
            self.c1, self.c4, self.umax
        ));
        match &self.params {
            PolicyParams::General(p) => {
                let d = &p.diagnostics;
                out.push_str(&format!(
                    "general policy: psi = {:.9}   maxinv = {:.9}\n",
                    p.psi, p.mean_inv_max
                ));
                out.push_str(&format!(
                    "  noise-to-signal product  {:.9} < 1                 {}\n",
                    d.noise_gain.value,
                    pass_str(d.noise_gain.ok)
                ));
                out.push_str(&format!(
                    "  authority                {} > {:.9}       {}\n",
                    p.umax,
                    d.authority.bound,
                    pass_str(d.authority.ok)
                ));
                out.push_str(&format!(
                    "  saturation radius        r = {:.9} <= Umax       {}\n",
                    p.sat_radius,
                    pass_str(d.sat_radius.ok)
                ));
                out.push_str(&format!(
                    "  stacked amplitude        {:.9} <= Umax           {}\n",
                    d.amplitude.value,
                    pass_str(d.amplitude.ok)
                ));
                out.push_str(&format!(
                    "a = {:.12}   r = {:.12}   J = {:.12}\n",
                    p.drift_margin, p.sat_radius, p.sat_radius
                ));
            }
            PolicyParams::Burst(p) => {
                let d = &p.diagnostics;
                out.push_str(&format!("burst policy: p = {}\n", p.p));
                out.push_str(&format!(
                    "  authority                {} > {:.9}       {}\n",
                    p.umax,
                    d.authority.bound,
                    pass_str(d.authority.ok)
                ));
                out.push_str(&format!(
                    "  stacked amplitude        {:.9} <= Umax           {}\n",
                    d.amplitude.value,
                    pass_str(d.amplitude.ok)
                ));
                out.push_str(&format!(
                    "a = {:.12}   r = {:.12}   J = {:.12}\n",
                    p.drift_margin, p.sat_radius, p.sat_radius
                ));
            }
            PolicyParams::ZeroControl => {
                out.push_str("zero-control policy: no feasibility conditions\n");
            }
        }
        out.push_str(&format!(
            "feasible: {}\n",
            if self.feasible() { "yes" } else { "no" }
        ));
        out
    }
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Evaluate feasibility without requiring it (infeasibility is an outcome
/// here, not an error).
pub fn evaluate_feasibility(scenario: &SimScenario) -> Result<FeasibilityInfo, CliError> {
    let report = msb_core::model::validate(&scenario.model, &Default::default());
    if !report.pass {
        return Err(CliError::Scenario(format!(
            "model fails validation (orthogonality ok: {}, Schur ok: {}, reachable: {})",
            report.orthogonality_ok, report.schur_ok, report.reachable
        )));
    }
    let reach = build(&scenario.model)?;
    let params = match scenario.policy_kind {
        PolicyKind::General => {
            let stats = channel_stats_with(&scenario.channel, &scenario.stats_overrides)?;
            PolicyParams::General(check_general(
                &reach,
                &stats,
                scenario.process.c1,
                scenario.umax,
            )?)
        }
        PolicyKind::Burst => {
            let p = match &scenario.channel {
                msb_core::noise::ChannelModel::BurstBernoulli { p, .. } => *p,
                _ => {
                    return Err(CliError::Scenario(
                        "the burst policy needs a burst channel".into(),
                    ))
                }
            };
            PolicyParams::Burst(check_burst(&reach, p, scenario.process.c1, scenario.umax)?)
        }
        PolicyKind::ZeroControl => PolicyParams::ZeroControl,
    };
    Ok(FeasibilityInfo {
        kappa: reach.kappa,
        control_map_norm: reach.control_map_norm,
        pinv_norm: reach.pinv_norm,
        noise_map_norm: reach.noise_map_norm,
        c1: scenario.process.c1,
        c4: scenario.process.c4,
        umax: scenario.umax,
        params,
    })
}

#[derive(Debug)]
pub struct CheckOutcome {
    pub exit: i32,
    pub info: FeasibilityInfo,
}

/// `check`: print the feasibility report. Exit 0 when feasible, 2 when not.
pub fn cmd_check(path: &Path, seed: Option<u64>) -> Result<CheckOutcome, CliError> {
    let (file, _) = ScenarioFile::load(path)?;
    let scenario = file.to_sim_scenario(seed)?;
    let info = evaluate_feasibility(&scenario)?;
    print!("{}", info.render());
    let exit = if info.feasible() {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    };
    Ok(CheckOutcome { exit, info })
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub exit: i32,
    pub verdict: BoundednessVerdict,
    pub series: MomentSeries,
    pub moments_path: PathBuf,
    pub verdict_path: PathBuf,
}

/// `simulate`: run the Monte Carlo moment estimate and the plateau verdict,
/// writing `moments.csv` and `verdict.json` into `out_dir`. Exit 0 on PASS,
/// 3 on FAIL; partial outputs are removed on error.
pub fn cmd_simulate(
    path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    burn_in: f64,
) -> Result<SimulateOutcome, CliError> {
    let (file, scenario_hash) = ScenarioFile::load(path)?;
    let scenario = file.to_sim_scenario(seed)?;
    simulate_scenario(scenario, &scenario_hash, out_dir, burn_in)
}

pub fn simulate_scenario(
    scenario: SimScenario,
    scenario_hash: &str,
    out_dir: &Path,
    burn_in: f64,
) -> Result<SimulateOutcome, CliError> {
    let seed_used = scenario.master_seed;
    let prepared = prepare(scenario)?;
    let moments_path = out_dir.join("moments.csv");
    let verdict_path = out_dir.join("verdict.json");
    let result = (|| -> Result<(MomentSeries, BoundednessVerdict), CliError> {
        let series = monte_carlo_moments(&prepared)?;
        let verdict = boundedness_verdict(&series, burn_in)?;
        write_file(&moments_path, &moments_csv(&series))?;
        write_file(
            &verdict_path,
            &verdict_json(
                &verdict,
                prepared.params.feasible(),
                seed_used,
                scenario_hash,
            ),
        )?;
        Ok((series, verdict))
    })();
    match result {
        Ok((series, verdict)) => {
            println!(
                "boundedness: {}   zeta_hat = {:.6}   reference max = {:.6}   final max = {:.6}",
                if verdict.pass { "PASS" } else { "FAIL" },
                verdict.zeta_hat,
                verdict.reference_max,
                verdict.final_max
            );
            println!(
                "wrote {} and {}",
                moments_path.display(),
                verdict_path.display()
            );
            Ok(SimulateOutcome {
                exit: if verdict.pass { EXIT_OK } else { EXIT_FAIL },
                verdict,
                series,
                moments_path,
                verdict_path,
            })
        }
        Err(e) => {
            remove_files(&[&moments_path, &verdict_path]);
            Err(e)
        }
    }
}

#[derive(Debug)]
pub struct DriftOutcome {
    pub exit: i32,
    pub report: DriftReport,
    pub csv_path: PathBuf,
}

/// `drift`: estimate the window drift from probe states (given as radii
/// along the deterministic probe direction, or the documented default
/// multiples of the level). Exit 0 when all probes pass, 3 otherwise.
pub fn cmd_drift(
    path: &Path,
    radii: Option<Vec<f64>>,
    samples: usize,
    out: &Path,
    seed: Option<u64>,
) -> Result<DriftOutcome, CliError> {
    let (file, _) = ScenarioFile::load(path)?;
    let scenario = file.to_sim_scenario(seed)?;
    let prepared = prepare(scenario)?;
    drift_on_prepared(&prepared, radii, samples, out)
}

pub fn drift_on_prepared(
    prepared: &PreparedSim,
    radii: Option<Vec<f64>>,
    samples: usize,
    out: &Path,
) -> Result<DriftOutcome, CliError> {
    if samples < MIN_DRIFT_SAMPLES {
        eprintln!(
            "warning: {samples} samples per probe is below {MIN_DRIFT_SAMPLES}; \
             standard errors may be too large for a reliable verdict"
        );
    }
    let probes = match radii {
        Some(radii) => {
            let direction = probe_direction(prepared)?;
            radii.iter().map(|r| &direction * *r).collect()
        }
        None => default_probes(prepared)?,
    };
    let report = drift_check(prepared, &probes, samples)?;
    println!(
        "drift threshold {} at level J = {} ({} samples per probe)",
        report.threshold, report.level, report.samples
    );
    for probe in &report.probes {
        println!(
            "  probe |x2| = {:<12} estimate = {:>12.6}   se = {:.6}   {}",
            probe.probe_norm,
            probe.estimate,
            probe.se,
            pass_str(probe.pass)
        );
    }
    write_file(out, &drift_csv(&report))?;
    println!("wrote {}", out.display());
    Ok(DriftOutcome {
        exit: if report.all_pass { EXIT_OK } else { EXIT_FAIL },
        report,
        csv_path: out.to_path_buf(),
    })
}

#[derive(Debug)]
pub struct ExampleOutcome {
    pub exit: i32,
    pub feasible: bool,
    pub bounded_pass: Option<bool>,
    pub drift_pass: Option<bool>,
}

/// `example-scalar`: run the bundled scalar burst scenario end to end
/// (check, simulate, drift), with optional transmission-probability and
/// authority overrides.
pub fn cmd_example_scalar(
    out_dir: &Path,
    p_override: Option<f64>,
    umax_override: Option<f64>,
    seed: Option<u64>,
) -> Result<ExampleOutcome, CliError> {
    let mut file = ScenarioFile::parse(EXAMPLE1_JSON)?;
    if let Some(p) = p_override {
        file.channel = ChannelSection::BurstBernoulli { p };
    }
    if let Some(umax) = umax_override {
        file.policy.umax = umax;
    }
    let text = file.to_json();
    let scenario_hash = sha256_hex(text.as_bytes());
    let scenario_path = out_dir.join("scenario.json");
    write_file(&scenario_path, &text)?;

    let scenario = file.to_sim_scenario(seed)?;
    let info = evaluate_feasibility(&scenario)?;
    print!("{}", info.render());
    if !info.feasible() {
        println!("summary: infeasible; nothing to simulate");
        return Ok(ExampleOutcome {
            exit: EXIT_INFEASIBLE,
            feasible: false,
            bounded_pass: None,
            drift_pass: None,
        });
    }

    let sim = simulate_scenario(scenario.clone(), &scenario_hash, out_dir, defaults::BURN_IN)?;
    let prepared = prepare(scenario)?;
    let drift = drift_on_prepared(
        &prepared,
        None,
        defaults::DRIFT_SAMPLES,
        &out_dir.join("drift.csv"),
    )?;

    println!("summary:");
    println!("  feasible      yes");
    println!("  bounded       {}", pass_str(sim.verdict.pass));
    println!("  drift probes  {}", pass_str(drift.report.all_pass));
    let exit = if sim.exit != EXIT_OK {
        sim.exit
    } else {
        drift.exit
    };
    Ok(ExampleOutcome {
        exit,
        feasible: true,
        bounded_pass: Some(sim.verdict.pass),
        drift_pass: Some(drift.report.all_pass),
    })
}
