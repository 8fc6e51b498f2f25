//! End-to-end acceptance checks, one per verifiable claim the library
//! makes: the closed-form linear mean-mass law, exact deterministic
//! conservation, pathwise ledger closure under time refinement, the
//! admissible-exponent identity, explicit-constant moment bounds,
//! absorbing-ball entry timing, gauge invariance of the nonlinearity,
//! and bytewise reproducibility of the artifact pipeline.
//!
//! Each check prints a single PASS/FAIL line with a short figure of
//! merit and its wall time; the test fails if any check does.  Scales
//! are deliberately desk-sized (grids up to 64^2, up to 1000 paths).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use fnls_core::app::cmd_ensemble;
use fnls_core::config::RunConfig;
use fnls_core::diagnostics::{
    ito_mass_residual, moment_bound_check, nonlinear_mass_contribution, pullback_absorption_probe,
    run_ensemble, AbsorbingProbe, Psi1Schedule,
};
use fnls_core::dynamics::{admissible_pair, validate_regime, ForcingSpec, ModelParams};
use fnls_core::integrator::{
    run_path, run_path_with_source, BlowupGuard, RecordingLevel, RunSetup, SchemeId,
};
use fnls_core::noise::{BrownianPath, CovarianceSpec, NoiseSource};
use fnls_core::spectral::{Grid, SpectralField};
use fnls_core::Cplx;

const TAU: f64 = std::f64::consts::TAU;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Band-limited initial state assembled through the config layer.
fn band_state(points: usize, support: usize, mass: f64) -> Result<SpectralField<f64>, String> {
    let text = format!(
        "grid.points = {points}\ninit.kind = band\ninit.support = {support}\ninit.mass = {mass}\n"
    );
    let cfg = RunConfig::parse(&text).map_err(err)?;
    let grid = cfg.build_grid().map_err(err)?;
    cfg.build_initial(&grid).map_err(err)
}

/// Configuration shared by checks 1 and 8: linear model (no
/// nonlinearity, no deterministic forcing) with trace-class noise, so
/// the mean mass has a closed form.
fn linear_ensemble_config(out: &Path) -> String {
    format!(
        "# linear model: mean mass relaxes to the noise plateau\n\
         model.n = 2\n\
         model.alpha = 0.75\n\
         model.sigma = 0\n\
         model.gamma = 1\n\
         grid.points = 64\n\
         noise.scale = 0.5\n\
         noise.decay = 3\n\
         noise.cutoff = 33\n\
         run.t1 = 3\n\
         run.dt = 0.001\n\
         run.recording = mass\n\
         init.kind = gaussian\n\
         init.amplitude = 1\n\
         init.width = 0.8\n\
         init.mass = 2\n\
         seed = 91\n\
         paths = 1000\n\
         output_dir = {}\n",
        out.display()
    )
}

fn report_record(dir: &Path, record: &str) -> Result<serde_json::Value, String> {
    let text =
        fs::read_to_string(dir.join("reports.jsonl")).map_err(|e| format!("reports.jsonl: {e}"))?;
    for line in text.lines() {
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| format!("reports.jsonl: {e}"))?;
        if value["record"] == record {
            return Ok(value);
        }
    }
    Err(format!("no `{record}` record in reports.jsonl"))
}

/// Check 1: over 1000 noise paths of the linear model, the ensemble mean
/// mass must match the closed form exp(-2 gamma t) M0 + plateau terms at
/// every recorded time, within three standard errors.
fn linear_mean_mass_law(out: &Path) -> Result<String, String> {
    let cfg = RunConfig::parse(&linear_ensemble_config(out)).map_err(err)?;
    let code = cmd_ensemble(&cfg);
    if code != 0 {
        return Err(format!("ensemble command exited with code {code}"));
    }
    let rec = report_record(out, "expected_mass")?;
    if rec["kind"] != "closed_form" {
        return Err(format!("wrong law kind {}", rec["kind"]));
    }
    let worst = rec["worst_gap_over_band"].as_f64().unwrap_or(f64::NAN);
    if rec["passed"] != serde_json::Value::Bool(true) {
        return Err(format!("closed-form gap reached {worst:.3} bands"));
    }
    Ok(format!(
        "1000 paths x 3001 times, worst gap {worst:.2} of the 3-SE band"
    ))
}

/// Check 2: with damping, forcing, and noise all off, the Strang scheme
/// holds the mass of a band-limited state to 1e-10 relative over 1000
/// steps (the cubic of the initial band stays inside the kept modes).
fn deterministic_mass_conservation() -> Result<String, String> {
    let text = "model.n = 2\n\
                model.alpha = 0.75\n\
                model.sigma = 1\n\
                model.gamma = 0\n\
                grid.points = 32\n\
                noise.scale = 0\n\
                run.t1 = 1\n\
                run.dt = 0.001\n\
                run.scheme = strang\n\
                run.recording = mass\n\
                init.kind = band\n\
                init.support = 3\n\
                init.amplitude = 0.6\n\
                init.mass = 1\n";
    let cfg = RunConfig::parse(text).map_err(err)?;
    let grid = cfg.build_grid().map_err(err)?;
    let params = cfg.build_params().map_err(err)?;
    let setup = cfg.build_setup().map_err(err)?;
    let u0 = cfg.build_initial(&grid).map_err(err)?;
    let traj = run_path(&params, None, &setup, &u0, 1, 0).map_err(err)?;
    traj.ensure_completed().map_err(err)?;
    let m0 = traj.masses()[0];
    let drift = traj
        .masses()
        .iter()
        .map(|&m| ((m - m0) / m0).abs())
        .fold(0.0, f64::max);
    if drift <= 1e-10 {
        Ok(format!(
            "relative drift {:.2e} over {} Strang steps",
            drift,
            traj.steps_completed()
        ))
    } else {
        Err(format!("relative drift {drift:.2e} exceeds 1e-10"))
    }
}

/// The full model used by checks 3 and 7: power nonlinearity, phase
/// forcing, and trace-class noise all active.
fn full_model() -> Result<(ModelParams<f64>, CovarianceSpec<f64>, SpectralField<f64>), String> {
    let grid = Grid::new(2, 32, TAU).map_err(err)?;
    let forcing =
        ForcingSpec::linear_phase(grid, |x| 0.025 * (1.0 + x[0].cos()), 0.05).map_err(err)?;
    let params = ModelParams::new(0.75, 1.0, 1.0, forcing).map_err(err)?;
    let cov = CovarianceSpec::builtin(grid, 0.4, 3.0, 16).map_err(err)?;
    let u0 = band_state(32, 3, 1.0)?;
    Ok((params, cov, u0))
}

/// Check 3: the first-order mass ledger is closed with left-point
/// quadrature, so on one frozen noise path its defect must shrink
/// monotonically as dt is refined 4e-3 -> 2e-3 -> 1e-3, with observed
/// order at least 1/2.
fn ledger_refinement() -> Result<String, String> {
    let (params, cov, u0) = full_model()?;
    let fine_dt = 1e-3;
    let fine_steps = 1000;
    let path = BrownianPath::generate(&cov, 7, 0, fine_dt, fine_steps).map_err(err)?;

    let mut residuals = Vec::new();
    for stride in [4usize, 2, 1] {
        let setup = RunSetup::new(SchemeId::ExpEuler, 1.0, stride as f64 * fine_dt)
            .with_recording(RecordingLevel::Ledger);
        let source = NoiseSource::frozen(&path, stride).map_err(err)?;
        let traj =
            run_path_with_source(&params, Some(&cov), &setup, &u0, source, 0).map_err(err)?;
        traj.ensure_completed().map_err(err)?;
        let ledger = ito_mass_residual(&traj, 1).map_err(err)?;
        residuals.push(ledger.max_relative_residual());
    }

    if !(residuals[0] > residuals[1] && residuals[1] > residuals[2]) {
        return Err(format!(
            "residuals not monotone under refinement: {:.3e}, {:.3e}, {:.3e}",
            residuals[0], residuals[1], residuals[2]
        ));
    }
    let order = (residuals[0] / residuals[2]).ln() / 4.0f64.ln();
    if order < 0.5 {
        return Err(format!("observed order {order:.2} below 0.5"));
    }
    Ok(format!(
        "residuals {:.2e} > {:.2e} > {:.2e}, observed order {:.2}",
        residuals[0], residuals[1], residuals[2], order
    ))
}

/// Check 4: for 10^4 random parameter triples inside the admissible
/// region, the generated exponent pair satisfies the scaling identity
/// 2 alpha / r + n / p = n / 2 to 1e-12 and never lands on the excluded
/// endpoint.
fn admissible_identity() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(20_260_823);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=5usize);
        let thresholds = validate_regime::<f64>(n, 0.9, 0.0, 1.0, 0.0);
        let alpha = thresholds.alpha_lower + (1.0 - thresholds.alpha_lower) * rng.gen::<f64>();
        let sigma_upper = validate_regime::<f64>(n, alpha, 0.0, 1.0, 0.0).sigma_upper;
        let sigma = sigma_upper.min(1e6) * rng.gen::<f64>();
        let pair = admissible_pair(n, alpha, sigma)
            .map_err(|e| format!("valid triple (n={n}, alpha={alpha}, sigma={sigma}): {e}"))?;
        let residual = pair.scaling_identity_residual();
        worst = worst.max(residual);
        if residual > 1e-12 {
            return Err(format!(
                "identity residual {residual:.3e} at (n={n}, alpha={alpha}, sigma={sigma})"
            ));
        }
        if pair.is_endpoint() {
            return Err(format!(
                "excluded endpoint produced at (n={n}, alpha={alpha}, sigma={sigma})"
            ));
        }
    }
    Ok(format!(
        "10000 triples, worst identity residual {worst:.1e}, endpoint never produced"
    ))
}

/// Check 5: with phase forcing (growth constant 0.1) and damping 1, the
/// ensemble mean of mass powers m = 1, 2, 3 over 500 paths must stay
/// under the explicit-constant bound, up to three standard errors, on
/// the whole window [0, 5].
fn moment_bound_dominance() -> Result<String, String> {
    let grid = Grid::new(2, 16, TAU).map_err(err)?;
    let forcing =
        ForcingSpec::linear_phase(grid, |x| 0.05 * (1.0 + x[0].cos()), 0.1).map_err(err)?;
    let params = ModelParams::new(0.75, 1.0, 1.0, forcing).map_err(err)?;
    let cov = CovarianceSpec::builtin(grid, 0.3, 3.0, 8).map_err(err)?;
    let u0 = band_state(16, 1, 2.0)?;
    let setup = RunSetup::new(SchemeId::ExpEuler, 5.0, 5e-3);
    let trajs = run_ensemble(&params, Some(&cov), &setup, &u0, 17, 500).map_err(err)?;

    let mut detail = String::from("500 paths");
    for m in 1..=3 {
        let report = moment_bound_check(&trajs, &params, m).map_err(err)?;
        if !report.passed {
            return Err(format!(
                "order {m}: margin {:.3e} dips below zero",
                report.min_margin
            ));
        }
        let _ = write!(detail, "; m={m} min margin {:.2e}", report.min_margin);
    }
    Ok(detail)
}

/// Check 6: start the linear model at 100x the noise plateau.  The mean
/// mass must enter the absorbing ball (radius = twice the plateau)
/// within two horizon cells of the analytic entry time ln(99) / (2
/// gamma), and the approach must be monotone up to sampling noise.
fn absorption_entry() -> Result<String, String> {
    let grid = Grid::new(2, 32, TAU).map_err(err)?;
    let params = ModelParams::new(0.75, 0.0, 1.0, ForcingSpec::zero(grid)).map_err(err)?;
    let cov = CovarianceSpec::builtin(grid, 0.5, 3.0, 33).map_err(err)?;
    let plateau = cov.hs_norm_sq() / 2.0;

    let mut u0 = band_state(32, 3, 1.0)?;
    let target = 100.0 * plateau;
    let factor = (target / u0.l2_norm_sq()).sqrt();
    u0.scale(Cplx::new(factor, 0.0));

    let cell = 0.125;
    let probe = AbsorbingProbe {
        rho: 2.0,
        reference_moment: 0.0,
        varrho_grid: vec![0.0],
        t_grid: (0..=32).map(|i| i as f64 * cell).collect(),
        schedule: Psi1Schedule::Zero,
        paths: 600,
        dt: 2.5e-3,
        scheme: SchemeId::ExpEuler,
        guard: BlowupGuard::default(),
        seed: 5,
    };
    let family = vec![("hundredfold".to_string(), u0)];
    let report = pullback_absorption_probe(&probe, &params, Some(&cov), &family).map_err(err)?;

    let probe_cell = &report.cells[0];
    if probe_cell.flagged {
        return Err("family tripped the blow-up guard".into());
    }
    let entry = probe_cell
        .entry_time
        .ok_or("mean mass never entered the absorbing ball")?;
    let predicted = 0.5 * 99.0f64.ln();
    let gap = (entry - predicted).abs();
    if gap > 2.0 * cell + 1e-9 {
        return Err(format!(
            "entry at {entry:.3} vs analytic {predicted:.3}: gap {gap:.3} exceeds two cells"
        ));
    }

    let (_, means, errors) = &report.family_curves[0];
    let entry_index = report
        .t_grid
        .iter()
        .position(|&t| (t - entry).abs() < 1e-12)
        .ok_or("entry time missing from the horizon grid")?;
    for j in entry_index..means.len() - 1 {
        let allowance = 3.0 * (errors[j] + errors[j + 1]) + 1e-12;
        if means[j + 1] > means[j] + allowance {
            return Err(format!(
                "saturation rises at t = {:.3}: {:.6} -> {:.6} (allowance {:.2e})",
                report.t_grid[j + 1],
                means[j],
                means[j + 1],
                allowance
            ));
        }
    }
    Ok(format!(
        "entry {entry:.3} vs analytic {predicted:.4} (gap {gap:.3} <= {:.2}), decay monotone after entry",
        2.0 * cell
    ))
}

/// Check 7: the power nonlinearity only rotates the phase, so injecting
/// it into the mass ledger must contribute nothing beyond roundoff on
/// a trajectory of the full model.
fn gauge_invariance() -> Result<String, String> {
    let (params, cov, u0) = full_model()?;
    let dt = 2e-3;
    let setup = RunSetup::new(SchemeId::ExpEuler, 0.5, dt);
    let traj = run_path(&params, Some(&cov), &setup, &u0, 23, 0).map_err(err)?;
    traj.ensure_completed().map_err(err)?;

    let mut contribution =
        (nonlinear_mass_contribution(&u0, params.sigma()).map_err(err)? * dt).abs();
    contribution = contribution.max(
        (nonlinear_mass_contribution(traj.final_state(), params.sigma()).map_err(err)? * dt).abs(),
    );
    if contribution <= 1e-12 {
        Ok(format!(
            "worst ledger contribution {contribution:.2e} per step"
        ))
    } else {
        Err(format!(
            "nonlinear ledger contribution {contribution:.2e} exceeds 1e-12"
        ))
    }
}

/// Check 8: rerunning the check-1 configuration into a fresh directory
/// reproduces every artifact byte for byte.
fn rerun_determinism(first: &Path, second: &Path) -> Result<String, String> {
    let cfg = RunConfig::parse(&linear_ensemble_config(second)).map_err(err)?;
    let code = cmd_ensemble(&cfg);
    if code != 0 {
        return Err(format!("second run exited with code {code}"));
    }
    let mut sizes = Vec::new();
    for name in ["mean_mass.csv", "reports.jsonl", "manifest.json"] {
        let a = fs::read(first.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = fs::read(second.join(name)).map_err(|e| format!("{name}: {e}"))?;
        if a != b {
            return Err(format!("{name} differs between the two runs"));
        }
        sizes.push(format!("{name} ({} bytes)", a.len()));
    }
    Ok(format!("byte-identical: {}", sizes.join(", ")))
}

fn check(
    failures: &mut Vec<&'static str>,
    label: &'static str,
    body: impl FnOnce() -> Result<String, String>,
) {
    let start = Instant::now();
    let outcome = body();
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => println!("PASS {label}: {detail} [{seconds:.1} s]"),
        Err(reason) => {
            println!("FAIL {label}: {reason} [{seconds:.1} s]");
            failures.push(label);
        }
    }
}

#[test]
fn acceptance() {
    let base = tempfile::tempdir().expect("tempdir");
    let first = base.path().join("run_a");
    let second = base.path().join("run_b");

    let mut failures = Vec::new();
    check(&mut failures, "1 linear mean-mass law", || {
        linear_mean_mass_law(&first)
    });
    check(&mut failures, "2 deterministic mass conservation", || {
        deterministic_mass_conservation()
    });
    check(&mut failures, "3 ledger closure under refinement", || {
        ledger_refinement()
    });
    check(&mut failures, "4 admissible-pair identity", || {
        admissible_identity()
    });
    check(&mut failures, "5 moment-bound dominance", || {
        moment_bound_dominance()
    });
    check(&mut failures, "6 absorbing-ball entry time", || {
        absorption_entry()
    });
    check(&mut failures, "7 nonlinearity gauge invariance", || {
        gauge_invariance()
    });
    check(&mut failures, "8 bytewise rerun determinism", || {
        rerun_determinism(&first, &second)
    });

    assert!(
        failures.is_empty(),
        "failed checks: {}",
        failures.join(", ")
    );
}
