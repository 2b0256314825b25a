//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p msb-cli --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use std::path::Path;
use std::time::Instant;

use msb_cli::scenario::ScenarioFile;
use msb_core::model::{OrthBlock, State, SystemModel};
use msb_core::nalgebra::{DMatrix, DVector};
use msb_core::noise::{
    channel_stats, ChannelDraw, ChannelModel, ComponentDist, ProcessNoise, ProcessNoiseModel,
    StatsOverrides,
};
use msb_core::policy::{check_burst, check_general, plan_burst, plan_general, PolicyParams};
use msb_core::reachability::{build, pinv_full_row_rank, spectral_norm};
use msb_core::rng::{stream, Purpose};
use msb_core::sim::{
    boundedness_verdict, drift_check, fourth_moment_check, monte_carlo_moments, prepare,
    run_trajectory, PolicyKind, PreparedSim, RecordMode, SimScenario,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn pass_line(number: u32, name: &str, started: Instant) {
    println!(
        "acceptance {number:02} {name}: PASS ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

fn scenarios_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn example1_scenario() -> SimScenario {
    ScenarioFile::parse(msb_cli::scenario::EXAMPLE1_JSON)
        .unwrap()
        .to_sim_scenario(None)
        .unwrap()
}

fn rotation_zero_scenario() -> SimScenario {
    ScenarioFile::parse(msb_cli::scenario::ROTATION_ZERO_CONTROL_JSON)
        .unwrap()
        .to_sim_scenario(None)
        .unwrap()
}

/// Quarter-turn rotation plant with the uniform [0.9, 1.1] channel and
/// Gaussian process noise; the authority is fixed at twice its threshold.
fn rotation_general_scenario() -> (SimScenario, f64) {
    let model = SystemModel::new(
        DMatrix::zeros(0, 0),
        vec![OrthBlock::Rotation {
            theta: std::f64::consts::FRAC_PI_2,
        }],
        DMatrix::zeros(0, 1),
        DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
    )
    .unwrap();
    let channel = ChannelModel::PerComponentIID {
        components: vec![ComponentDist::UniformInterval { lo: 0.9, hi: 1.1 }],
    };
    let process = ProcessNoiseModel::new(ProcessNoise::Gaussian { std: 0.1 }, 0, 2).unwrap();
    let reach = build(&model).unwrap();
    let stats = channel_stats(&channel).unwrap();
    let probe = check_general(&reach, &stats, process.c1, 1.0).unwrap();
    let threshold = probe.diagnostics.authority.bound;
    let umax = 2.0 * threshold;
    let scenario = SimScenario {
        model,
        channel,
        process,
        policy_kind: PolicyKind::General,
        umax,
        x0: State::new(DVector::zeros(0), DVector::from_vec(vec![10.0, 0.0])),
        horizon: 4000,
        trajectories: 2000,
        master_seed: 90210,
        record: RecordMode::Thinned,
        stats_overrides: StatsOverrides::default(),
    };
    (scenario, threshold)
}

fn random_plant(
    rng: &mut ChaCha8Rng,
) -> Option<(SystemModel, msb_core::reachability::ReachabilityData)> {
    let n_blocks = rng.random_range(1..=3);
    let blocks: Vec<OrthBlock> = (0..n_blocks)
        .map(|_| match rng.random_range(0..3) {
            0 => OrthBlock::PlusOne,
            1 => OrthBlock::MinusOne,
            _ => {
                let lower = rng.random::<bool>();
                let theta = if lower {
                    0.1 + rng.random::<f64>() * (std::f64::consts::PI - 0.2)
                } else {
                    std::f64::consts::PI + 0.1 + rng.random::<f64>() * (std::f64::consts::PI - 0.2)
                };
                OrthBlock::Rotation { theta }
            }
        })
        .collect();
    let d2: usize = blocks.iter().map(OrthBlock::dim).sum();
    let m = rng.random_range(1..=2);
    let b2 = DMatrix::from_fn(d2, m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let model = SystemModel::new(DMatrix::zeros(0, 0), blocks, DMatrix::zeros(0, m), b2).ok()?;
    let reach = build(&model).ok()?;
    Some((model, reach))
}

/// Criterion 1: with the channel frozen at its mean (general) or at one
/// (burst) and no process noise, one window cancels the orthogonal state
/// exactly, over 100 random plants with d2 <= 6.
#[test]
fn c01_deadbeat_equivalence() {
    let started = Instant::now();
    let mut rng = stream(0xC01, 0, Purpose::ProbeDirection);
    let mut done = 0;
    while done < 100 {
        let Some((model, reach)) = random_plant(&mut rng) else {
            continue;
        };
        assert!(reach.d2 <= 6);

        // Burst mechanics with nu = 1.
        let burst = check_burst(&reach, 0.6, 0.0, 1.0).unwrap();
        assert!(burst.feasible);
        let dir = DVector::from_fn(reach.d2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let x2_0 = if dir.norm() > 0.0 {
            &dir * (0.95 * burst.sat_radius / dir.norm())
        } else {
            dir.clone()
        };
        let stacked = plan_burst(&burst, &reach, &x2_0).unwrap();
        let mut x = State::new(DVector::zeros(0), x2_0.clone());
        let w = DVector::zeros(model.d());
        for i in 0..reach.kappa {
            let u = stacked.rows(i * reach.m, reach.m).into_owned();
            x = msb_core::sim::step(&model, &x, &u, &ChannelDraw::Burst(1.0), &w);
        }
        assert!(
            x.x2.norm() <= 1e-9 * (1.0 + x2_0.norm()),
            "burst residual {} for d2 = {}",
            x.x2.norm(),
            reach.d2
        );

        // General mechanics with nu = mu (mean sized so the stacked
        // amplitude fits the authority).
        let mean = 1.5 * reach.pinv_norm.max(1.0);
        let stats = channel_stats(&ChannelModel::PerComponentIID {
            components: vec![ComponentDist::PointMass { v: mean }; reach.m],
        })
        .unwrap();
        let general = check_general(&reach, &stats, 0.0, 1.0).unwrap();
        assert!(general.feasible, "diag: {:?}", general.diagnostics);
        let x2_0 = if dir.norm() > 0.0 {
            &dir * (0.95 * general.sat_radius / dir.norm())
        } else {
            dir
        };
        let stacked = plan_general(&general, &reach, &x2_0).unwrap();
        let mut x = State::new(DVector::zeros(0), x2_0.clone());
        let nu = ChannelDraw::PerStep(stats.mu.clone());
        for i in 0..reach.kappa {
            let u = stacked.rows(i * reach.m, reach.m).into_owned();
            x = msb_core::sim::step(&model, &x, &u, &nu, &w);
        }
        assert!(
            x.x2.norm() <= 1e-9 * (1.0 + x2_0.norm()),
            "general residual {} for d2 = {}",
            x.x2.norm(),
            reach.d2
        );
        done += 1;
    }
    assert!(
        started.elapsed().as_secs_f64() < 5.0,
        "criterion 1 over 5 s"
    );
    pass_line(1, "deadbeat equivalence (100 random plants)", started);
}

/// Criterion 2: every simulated step of every bundled scenario respects the
/// authority (the runner refuses violations beyond 1e-12 relative).
#[test]
fn c02_admissibility_every_step() {
    let started = Instant::now();
    let scenarios = [
        example1_scenario(),
        rotation_general_scenario().0,
        rotation_zero_scenario(),
    ];
    for mut scenario in scenarios {
        scenario.trajectories = 300;
        let umax = scenario.umax;
        let prepared = prepare(scenario).unwrap();
        let series = monte_carlo_moments(&prepared).unwrap();
        assert!(
            series.max_control_norm <= umax * (1.0 + 1e-12),
            "max control {} exceeds {umax}",
            series.max_control_norm
        );
    }
    pass_line(2, "admissibility on every simulated step", started);
}

/// Criterion 3: the scalar example's synthesized constants are exact, and
/// the boundary authority is rejected.
#[test]
fn c03_example_feasibility_arithmetic() {
    let started = Instant::now();
    let scenario = example1_scenario();
    assert!((scenario.process.c1 - 0.5).abs() <= 1e-12);
    assert!((scenario.process.c4 - 0.2).abs() <= 1e-12);
    let prepared = prepare(scenario).unwrap();
    match &prepared.params {
        PolicyParams::Burst(p) => {
            assert!(
                (p.drift_margin - 1.0).abs() <= 1e-12,
                "a = {}",
                p.drift_margin
            );
            assert!((p.sat_radius - 2.0).abs() <= 1e-12, "r = {}", p.sat_radius);
            assert!(p.feasible);
        }
        other => panic!("expected burst params, got {other:?}"),
    }

    let boundary = check_burst(&prepared.reach, 0.5, 0.5, 1.0).unwrap();
    assert!(!boundary.feasible, "Umax = C1/p must be rejected (strict)");
    pass_line(3, "scalar example feasibility arithmetic", started);
}

/// Criterion 4: empirical window drift from probes at 10, 50, 500 stays
/// below -p a + 3 SE, with the far-probe mean near its exact value -1.
#[test]
fn c04_drift_verification() {
    let started = Instant::now();
    let prepared = prepare(example1_scenario()).unwrap();
    let probes: Vec<DVector<f64>> = [10.0, 50.0, 500.0]
        .iter()
        .map(|r| DVector::from_vec(vec![*r]))
        .collect();
    let report = drift_check(&prepared, &probes, 10_000).unwrap();
    assert!((report.threshold + 0.5).abs() <= 1e-12);
    for probe in &report.probes {
        assert!(
            probe.estimate <= report.threshold + 3.0 * probe.se,
            "probe {}: estimate {} threshold {}",
            probe.probe_norm,
            probe.estimate,
            report.threshold
        );
        assert!(
            (probe.estimate + 1.0).abs() <= 0.05,
            "probe {}: estimate {} not near -1",
            probe.probe_norm,
            probe.estimate
        );
    }
    assert!(report.all_pass);
    assert!(
        started.elapsed().as_secs_f64() < 10.0,
        "criterion 4 over 10 s"
    );
    pass_line(4, "window drift at probes 10/50/500", started);
}

/// Criterion 5: the scalar example is mean-square bounded by the plateau
/// test, within 60 s on a single worker.
#[test]
fn c05_mean_square_boundedness() {
    let started = Instant::now();
    let prepared = prepare(example1_scenario()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let series = pool.install(|| monte_carlo_moments(&prepared)).unwrap();
    let verdict = boundedness_verdict(&series, 0.5).unwrap();
    assert!(
        verdict.pass,
        "final max {} vs reference max {}",
        verdict.final_max, verdict.reference_max
    );
    assert!(verdict.zeta_hat.is_finite());
    assert!(
        started.elapsed().as_secs_f64() < 60.0,
        "criterion 5 over 60 s single-worker"
    );
    pass_line(5, "mean-square boundedness (single worker)", started);
}

/// Criterion 6: with no control the rotation plant grows linearly at rate
/// E||w||^2 = 2/3 (slope within 5%), and the verdict detects it as FAIL.
#[test]
fn c06_zero_control_growth_oracle() {
    let started = Instant::now();
    let prepared = prepare(rotation_zero_scenario()).unwrap();
    let series = monte_carlo_moments(&prepared).unwrap();

    // Least-squares slope of the mean series against time.
    let n = series.times.len() as f64;
    let t_mean = series.times.iter().map(|&t| t as f64).sum::<f64>() / n;
    let y_mean = series.mean_x_sq.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &t) in series.times.iter().enumerate() {
        let dt = t as f64 - t_mean;
        num += dt * (series.mean_x_sq[i] - y_mean);
        den += dt * dt;
    }
    let slope = num / den;
    let expected = 2.0 / 3.0;
    assert!(
        (slope - expected).abs() / expected < 0.05,
        "slope {slope} vs {expected}"
    );

    let verdict = boundedness_verdict(&series, 0.5).unwrap();
    assert!(!verdict.pass, "growth must be detected as FAIL");
    pass_line(6, "zero-control growth oracle (slope and FAIL)", started);
}

/// Independent spectral-norm oracle: direction search by a uniform scatter
/// followed by a shrinking local zoom, using only norm evaluations.
fn brute_force_spectral_norm(m: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let n = m.ncols();
    let unit = |v: DVector<f64>| {
        let norm = v.norm();
        if norm == 0.0 {
            DVector::from_element(n, (n as f64).sqrt().recip())
        } else {
            v / norm
        }
    };
    let mut best_dir = unit(DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5));
    let mut best = (m * &best_dir).norm();
    let mut evals = 1usize;
    for _ in 0..4_000 {
        let v = unit(DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5));
        let f = (m * &v).norm();
        evals += 1;
        if f > best {
            best = f;
            best_dir = v;
        }
    }
    let mut radius = 0.5f64;
    while evals < 10_000 && radius > 1e-13 {
        let mut improved = false;
        for _ in 0..120 {
            let v = unit(
                &best_dir + radius * DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0),
            );
            let f = (m * &v).norm();
            evals += 1;
            if f > best {
                best = f;
                best_dir = v;
                improved = true;
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
    best
}

/// Criterion 7: the pseudoinverse is a right inverse to 1e-9 on 1000 random
/// full-row-rank matrices, and power iteration matches the direction-search
/// oracle to 1e-6 relative on matrices up to 8x8.
#[test]
fn c07_pinv_and_norm_kernels() {
    let started = Instant::now();
    let mut rng = stream(0xC07, 0, Purpose::ProbeDirection);

    let mut done = 0;
    while done < 1000 {
        let rows = rng.random_range(1..=8);
        let cols = rows + rng.random_range(0..=8);
        let r = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let pinv = match pinv_full_row_rank(&r, 1e-9) {
            Ok(p) => p,
            // A numerically rank-deficient draw does not count.
            Err(_) => continue,
        };
        let residual = (&r * &pinv - DMatrix::<f64>::identity(rows, rows)).amax();
        assert!(residual <= 1e-9, "residual {residual} on {rows}x{cols}");
        done += 1;
    }

    for _ in 0..30 {
        let rows = rng.random_range(1..=8);
        let cols = rng.random_range(1..=8);
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let fast = spectral_norm(&m).unwrap();
        let brute = brute_force_spectral_norm(&m, &mut rng);
        assert!(
            (fast - brute).abs() <= 1e-6 * brute.max(1e-12),
            "{rows}x{cols}: power iteration {fast} vs direction search {brute}"
        );
    }
    pass_line(7, "pseudoinverse and spectral-norm kernels", started);
}

/// Criterion 8: the empirical fourth moment of window increments stays
/// below the analytic bound on the scalar example and the zero-control
/// rotation plant.
#[test]
fn c08_fourth_moment_condition() {
    let started = Instant::now();

    let prepared = prepare(example1_scenario()).unwrap();
    let probes: Vec<DVector<f64>> = [4.0, 20.0, 200.0]
        .iter()
        .map(|r| DVector::from_vec(vec![*r]))
        .collect();
    let report = fourth_moment_check(&prepared, &probes, 4_000).unwrap();
    assert!((report.bound - 2.5f64.powi(4)).abs() <= 1e-12);
    for probe in &report.probes {
        assert!(
            probe.estimate <= report.bound,
            "probe {}: estimate {} bound {}",
            probe.probe_norm,
            probe.estimate,
            report.bound
        );
    }
    assert!(report.pass);

    let prepared = prepare(rotation_zero_scenario()).unwrap();
    let direction = DVector::from_vec(vec![0.6, -0.8]);
    let probes: Vec<DVector<f64>> = [5.0, 50.0, 500.0].iter().map(|r| &direction * *r).collect();
    let report = fourth_moment_check(&prepared, &probes, 4_000).unwrap();
    for probe in &report.probes {
        assert!(
            probe.estimate <= report.bound,
            "probe {}: estimate {} bound {}",
            probe.probe_norm,
            probe.estimate,
            report.bound
        );
    }
    assert!(report.pass);
    pass_line(8, "fourth-moment window bound", started);
}

/// Criterion 9: the general channel end to end. The noise-to-signal product
/// is 2 psi (about 0.115), the authority sits at twice its threshold, the
/// closed loop is bounded, and drift probes pass against -a.
#[test]
fn c09_general_channel_end_to_end() {
    let started = Instant::now();
    let (scenario, threshold) = rotation_general_scenario();
    let umax = scenario.umax;
    assert!((umax - 2.0 * threshold).abs() <= 1e-12 * umax);

    // The bundled scenario file pins the same authority.
    let bundled = ScenarioFile::parse(msb_cli::scenario::ROTATION_GENERAL_JSON).unwrap();
    assert!((bundled.policy.umax - umax).abs() <= 1e-12 * umax);

    let prepared = prepare(scenario).unwrap();
    let params = match &prepared.params {
        PolicyParams::General(p) => p.clone(),
        other => panic!("expected general params, got {other:?}"),
    };
    let expected_psi = (1.0f64 / 300.0).sqrt();
    assert!((params.psi - expected_psi).abs() <= 1e-9);
    assert!((params.diagnostics.noise_gain.value - 2.0 * params.psi).abs() <= 1e-9);
    assert!(params.diagnostics.noise_gain.value < 1.0);
    assert!(params.feasible);

    let series = monte_carlo_moments(&prepared).unwrap();
    let verdict = boundedness_verdict(&series, 0.5).unwrap();
    assert!(
        verdict.pass,
        "final max {} vs reference max {}",
        verdict.final_max, verdict.reference_max
    );

    let probes = msb_core::sim::default_probes(&prepared).unwrap();
    let report = drift_check(&prepared, &probes, 10_000).unwrap();
    assert!((report.threshold + params.drift_margin).abs() <= 1e-12);
    assert!(report.all_pass, "{report:?}");
    pass_line(9, "general channel end to end", started);
}

/// Criterion 10: rerunning the boundedness scenario with the same seed
/// reproduces moments.csv byte for byte, even across worker counts.
#[test]
fn c10_reproducibility() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let path = scenarios_dir().join("example1.json");
    let first = msb_cli::commands::cmd_simulate(&path, &tmp.path().join("a"), None, 0.5).unwrap();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(2)
        .build()
        .unwrap();
    let second = pool
        .install(|| msb_cli::commands::cmd_simulate(&path, &tmp.path().join("b"), None, 0.5))
        .unwrap();

    let a = std::fs::read(&first.moments_path).unwrap();
    let b = std::fs::read(&second.moments_path).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "moments.csv differs between identical runs");
    pass_line(10, "byte-identical reruns", started);
}

/// The drift rollouts of the criterion-9 scenario also satisfy the stricter
/// per-probe expectation: the saturated pull dominates the estimate.
#[test]
fn c09_supplement_drift_estimates_are_strongly_negative() {
    let (scenario, _) = rotation_general_scenario();
    let prepared: PreparedSim = prepare(scenario).unwrap();
    let probes = msb_core::sim::default_probes(&prepared).unwrap();
    let report = drift_check(&prepared, &probes, 4_000).unwrap();
    for probe in &report.probes {
        assert!(
            probe.estimate < report.threshold,
            "probe {} estimate {} should sit clear of threshold {}",
            probe.probe_norm,
            probe.estimate,
            report.threshold
        );
    }
    // Trajectory-level determinism of the same scenario.
    let a = run_trajectory(&prepared, 3).unwrap();
    let b = run_trajectory(&prepared, 3).unwrap();
    assert_eq!(a.states.last().unwrap().x2, b.states.last().unwrap().x2);
}
