//! Batch front end for the radial Liouville solver: parses JSON configs,
//! dispatches subcommands, and persists reports plus CSV traces.

mod config;

use clap::{Parser, Subcommand};
use liouville::masses;
use liouville::pohozaev;
use liouville::radial::{self, RadialProfile};
use liouville::report::SolveReport;
use liouville::shooting::{self, InversionTarget};
use liouville::variational;
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const CONFIG_HELP: &str = "\
Config file schema (strict JSON; unknown keys are rejected):

  matrix      n x n coefficient matrix A: symmetric, non-negative entries,
              invertible, irreducible.                            (required)
  h           positive weights h_i                        (default: all 1.0)
  beta        initial values u_i(0), full n-vector  (solve/masses/jacobian/
              continuation/verify)
  beta_grid   per-axis {start, stop, count} over beta_1..beta_{n-1} (sweep;
              a single axis over u_1(0) when n = 1)
  solve       solver options, each optional:
                rel_tol       per-step relative tolerance   (default 1e-10)
                abs_tol       per-step absolute tolerance   (default 1e-12)
                t_start       log-radius of the Taylor seed (default -12)
                t_max         log-radius cap                (default 60)
                slope_margin  decay margin delta            (default 0.05)
                tail_tol      tail mass bound at stop       (default 1e-9)
  invert      {sigma_head, guess?, max_iterations? (40), residual_tol? (1e-8)}
  continuation{eps_path}  strictly decreasing non-negative diagonal shifts
  pohozaev    {radii}     radii for identity traces (default 1, 5, R_cut)

Output layout: <out>/<command>-<config-stem>/{report.json, profile.csv,
trace.csv, meta.json}. Reports are deterministic; run metadata (timestamps)
lives only in meta.json. Exit codes: 1 invalid config, 2 solver failure,
3 verification failure.";

#[derive(Parser)]
#[command(name = "liouville", version, about = "Radial Liouville system solver", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $LIOUVILLE_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep/continuation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the solver's relative tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Suppress the one-line summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the radial IVP; emits the profile CSV and the mass report.
    Solve,
    /// Compute masses, exponents, and hypersurface residuals only.
    Masses,
    /// Shooting Jacobian d(sigma)/d(beta) plus kernel diagnostics.
    Jacobian,
    /// Invert the mass map: recover beta from target sigma_head.
    Invert,
    /// Injectivity sweep of the mass map over a beta grid.
    Sweep,
    /// Solve along a decreasing diagonal-perturbation path A + eps*I.
    Continuation,
    /// Run the full invariant battery; exits 3 on any failed tolerance.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Masses => "masses",
            Command::Jacobian => "jacobian",
            Command::Invert => "invert",
            Command::Sweep => "sweep",
            Command::Continuation => "continuation",
            Command::Verify => "verify",
        }
    }
}

/// Failure carrying the exit code mandated for its class.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn config(kind: &str, message: impl Into<String>) -> Self {
        Self {
            code: 1,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    /// Exit-2 failure from any solver-side error type.
    fn solver(e: &dyn std::fmt::Debug, message: impl Into<String>) -> Self {
        let dbg = format!("{e:?}");
        let kind: String = dbg
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        Self {
            code: 2,
            kind,
            message: message.into(),
        }
    }

    fn verify(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind: "VerificationFailed".to_string(),
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let payload = json!({"error": {"kind": f.kind, "message": f.message}});
            eprintln!("{payload}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::config("MissingConfig", "--config PATH is required"))?;
    let run = config::load(config_path, cli.tol)
        .map_err(|e| Failure::config(&e.kind, e.message))?;

    let out_root = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("LIOUVILLE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let stem = config_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("config");
    let dir = out_root.join(format!("{}-{stem}", cli.command.name()));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::config("Io", format!("cannot create {}: {e}", dir.display())))?;

    let summary = match cli.command {
        Command::Solve => cmd_solve(&run, &dir, true)?,
        Command::Masses => cmd_solve(&run, &dir, false)?,
        Command::Jacobian => cmd_jacobian(&run, &dir)?,
        Command::Invert => cmd_invert(&run, &dir)?,
        Command::Sweep => cmd_sweep(&run, &dir)?,
        Command::Continuation => cmd_continuation(&run, &dir)?,
        Command::Verify => cmd_verify(&run, &dir)?,
    };

    write_meta(cli, &dir)?;
    if !cli.quiet {
        println!("{summary} (reports in {})", dir.display());
    }
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::config("Io", e.to_string()))?;
    std::fs::write(dir.join(name), text + "\n")
        .map_err(|e| Failure::config("Io", format!("cannot write {name}: {e}")))
}

fn write_meta(cli: &Cli, dir: &Path) -> Result<(), Failure> {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let argv: Vec<String> = std::env::args().collect();
    let meta = json!({
        "unix_timestamp": now,
        "argv": argv,
        "version": env!("CARGO_PKG_VERSION"),
        "jobs": cli.jobs,
    });
    write_json(dir, "meta.json", &meta)
}

fn write_profile_csv(dir: &Path, profile: &RadialProfile) -> Result<(), Failure> {
    let mut buf = Vec::new();
    profile
        .write_csv(&mut buf)
        .map_err(|e| Failure::config("Io", e.to_string()))?;
    std::fs::write(dir.join("profile.csv"), buf)
        .map_err(|e| Failure::config("Io", format!("cannot write profile.csv: {e}")))
}

fn require_beta<'a>(run: &'a config::Run) -> Result<&'a [f64], Failure> {
    run.resolved
        .beta
        .as_deref()
        .ok_or_else(|| Failure::config("MissingField", "this subcommand needs \"beta\""))
}

fn solve_profile(run: &config::Run) -> Result<RadialProfile, Failure> {
    let beta = require_beta(run)?;
    radial::solve_radial(&run.matrix, &run.resolved.h, beta, &run.resolved.solve_options())
        .map_err(|e| {
            let msg = e.to_string();
            Failure::solver(&e, msg)
        })
}

fn cmd_solve(run: &config::Run, dir: &Path, with_profile: bool) -> Result<String, Failure> {
    let profile = solve_profile(run)?;
    let report = SolveReport::from_profile(&profile, None).map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    let summary = format!("sigma = {:?}", report.sigma);
    let payload = json!({
        "command": if with_profile { "solve" } else { "masses" },
        "config": &run.resolved,
        "sigma": report.sigma,
        "m": report.m,
        "lambda_I": report.lambda_i,
        "min_proper_lambda": report.min_proper_lambda,
        "tail_fraction": report.tail_fraction,
        "weighted_sigma": report.weighted_sigma,
        "converged": report.converged,
        "r_cut": report.r_cut,
        "grid_points": report.grid_points,
    });
    write_json(dir, "report.json", &payload)?;
    if with_profile {
        write_profile_csv(dir, &profile)?;
    }
    Ok(summary)
}

fn cmd_jacobian(run: &config::Run, dir: &Path) -> Result<String, Failure> {
    let profile = solve_profile(run)?;
    let basis = variational::jacobian_sigma(&profile).map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    let kernel = variational::kernel_check(&profile).map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    let payload = json!({
        "command": "jacobian",
        "config": &run.resolved,
        "dsigma": basis.dsigma(),
        "det_M_reduced": basis.det_m_reduced(),
        "kernel_deviation": kernel.max_deviation,
        "orthogonality_residual": kernel.orthogonality,
    });
    write_json(dir, "report.json", &payload)?;
    write_profile_csv(dir, &profile)?;
    Ok(format!("det M_reduced = {:e}", basis.det_m_reduced()))
}

fn cmd_invert(run: &config::Run, dir: &Path) -> Result<String, Failure> {
    let inv = run
        .resolved
        .invert
        .clone()
        .ok_or_else(|| Failure::config("MissingField", "invert needs an \"invert\" block"))?;
    let n = run.matrix.n();
    let target = InversionTarget {
        matrix: run.matrix.clone(),
        h: run.resolved.h.clone(),
        sigma_head: inv.sigma_head.clone(),
    };
    let guess = inv.guess.clone().unwrap_or_else(|| vec![0.0; n.saturating_sub(1)]);
    let result = shooting::invert_sigma(
        &target,
        &guess,
        &run.resolved.solve_options(),
        &run.resolved.newton_options(),
    )
    .map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    let summary = format!("beta = {:?} after {} iterations", result.beta, result.iterations);
    let payload = json!({
        "command": "invert",
        "config": &run.resolved,
        "beta": result.beta,
        "iterations": result.iterations,
        "residual_norm": result.residual_norm,
        "sigma": result.sigma,
    });
    write_json(dir, "report.json", &payload)?;
    write_profile_csv(dir, &result.profile)?;
    Ok(summary)
}

fn cmd_sweep(run: &config::Run, dir: &Path) -> Result<String, Failure> {
    let grid = run
        .resolved
        .grid_points()
        .ok_or_else(|| Failure::config("MissingField", "sweep needs \"beta_grid\""))?;
    let report = shooting::injectivity_sweep(
        &run.matrix,
        &run.resolved.h,
        &grid,
        &run.resolved.solve_options(),
    )
    .map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;

    let n = run.matrix.n();
    let head_dim = if n == 1 { 1 } else { n - 1 };
    let mut csv = String::new();
    for k in 1..=head_dim {
        csv.push_str(&format!("beta_{k},"));
    }
    for k in 1..=n {
        csv.push_str(&format!("sigma_{k},"));
    }
    csv.push_str("lambda_I,det_M,converged\n");
    for p in &report.points {
        for b in &p.beta {
            csv.push_str(&format!("{b:.16e},"));
        }
        match &p.sigma {
            Some(s) => {
                for v in s {
                    csv.push_str(&format!("{v:.16e},"));
                }
            }
            None => {
                for _ in 0..n {
                    csv.push_str("nan,");
                }
            }
        }
        csv.push_str(&format!(
            "{},{},{}\n",
            p.lambda_i.map_or("nan".to_string(), |x| format!("{x:.16e}")),
            p.det_m.map_or("nan".to_string(), |x| format!("{x:.16e}")),
            p.converged
        ));
    }
    std::fs::write(dir.join("trace.csv"), csv)
        .map_err(|e| Failure::config("Io", format!("cannot write trace.csv: {e}")))?;

    let converged = report.points.iter().filter(|p| p.converged).count();
    let payload = json!({
        "command": "sweep",
        "config": &run.resolved,
        "total_points": report.points.len(),
        "converged_points": converged,
        "min_image_ratio": report.min_image_ratio,
        "violations": report.violations,
        "scaling_degenerate": report.scaling_degenerate,
    });
    write_json(dir, "report.json", &payload)?;
    Ok(format!(
        "{converged}/{} points converged, {} injectivity violations",
        report.points.len(),
        report.violations.len()
    ))
}

fn cmd_continuation(run: &config::Run, dir: &Path) -> Result<String, Failure> {
    let beta = require_beta(run)?;
    let block = run
        .resolved
        .continuation
        .clone()
        .ok_or_else(|| Failure::config("MissingField", "continuation needs a \"continuation\" block"))?;
    let reports = shooting::continuation_solve(
        &run.matrix,
        &run.resolved.h,
        beta,
        &block.eps_path,
        &run.resolved.solve_options(),
    )
    .map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    let payload = json!({
        "command": "continuation",
        "config": &run.resolved,
        "reports": reports,
    });
    write_json(dir, "report.json", &payload)?;
    Ok(format!("{} path points solved", reports.len()))
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn check(checks: &mut Vec<Check>, name: impl Into<String>, value: f64, tolerance: f64) {
    let pass = value.abs() <= tolerance;
    checks.push(Check {
        name: name.into(),
        value,
        tolerance,
        pass,
    });
}

fn cmd_verify(run: &config::Run, dir: &Path) -> Result<String, Failure> {
    let profile = solve_profile(run)?;
    let n = run.matrix.n();
    let mut checks = Vec::new();

    let pi = masses::check_pi(&profile).map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    check(&mut checks, "lambda_I", pi.lambda_i, 1e-5);
    if n > 1 {
        // positivity check encoded as pass iff min proper Λ_J > 0
        checks.push(Check {
            name: "min_proper_lambda_positive".to_string(),
            value: pi.min_proper_lambda,
            tolerance: 0.0,
            pass: pi.min_proper_lambda > 0.0,
        });
    }

    let kernel = variational::kernel_check(&profile).map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    check(&mut checks, "kernel_deviation", kernel.max_deviation, 1e-7);
    for (i, o) in kernel.orthogonality.iter().enumerate() {
        check(&mut checks, format!("orthogonality_{}", i + 1), *o, 1e-6);
    }

    let r_cut = profile.r_cut();
    let radii: Vec<f64> = run
        .resolved
        .pohozaev
        .as_ref()
        .map(|p| p.radii.clone())
        .unwrap_or_else(|| vec![1.0, 5.0, r_cut])
        .into_iter()
        .filter(|&r| r <= r_cut)
        .collect();
    let lp = variational::solve_linearized(&profile, &vec![2.0; n]).map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    let trace = pohozaev::trace(&profile, Some(&lp), &radii).map_err(|e| {
        let msg = e.to_string();
        Failure::solver(&e, msg)
    })?;
    let mut csv = String::from("R,nonlinear_residual,linear_residual\n");
    let linear = trace.linear_residual.as_ref().unwrap();
    for (k, &r) in trace.radii.iter().enumerate() {
        check(
            &mut checks,
            format!("pohozaev_nonlinear_R{r:.3}"),
            trace.nonlinear_residual[k],
            1e-5,
        );
        check(&mut checks, format!("pohozaev_linear_R{r:.3}"), linear[k], 1e-5);
        csv.push_str(&format!(
            "{r:.16e},{:.16e},{:.16e}\n",
            trace.nonlinear_residual[k], linear[k]
        ));
    }
    std::fs::write(dir.join("trace.csv"), csv)
        .map_err(|e| Failure::config("Io", format!("cannot write trace.csv: {e}")))?;

    // round trip beta -> sigma_head -> invert -> beta (scaling-trivial for n = 1)
    if n > 1 {
        let mv = masses::compute_masses(&profile).map_err(|e| {
            let msg = e.to_string();
            Failure::solver(&e, msg)
        })?;
        let ws = mv.weighted_sigma(profile.weights());
        let beta = profile.beta();
        let target = InversionTarget {
            matrix: run.matrix.clone(),
            h: run.resolved.h.clone(),
            sigma_head: ws[..n - 1].to_vec(),
        };
        let guess: Vec<f64> = beta[..n - 1].iter().map(|b| b + 0.3).collect();
        match shooting::invert_sigma(
            &target,
            &guess,
            &run.resolved.solve_options(),
            &shooting::NewtonOptions::default(),
        ) {
            Ok(res) => {
                let err = res
                    .beta
                    .iter()
                    .zip(beta)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                check(&mut checks, "round_trip_beta", err, 1e-6);
            }
            Err(e) => {
                let msg = e.to_string();
                return Err(Failure::solver(&e, msg));
            }
        }
    }

    let passed = checks.iter().all(|c| c.pass);
    let payload = json!({
        "command": "verify",
        "config": &run.resolved,
        "checks": &checks,
        "passed": passed,
    });
    write_json(dir, "report.json", &payload)?;
    write_profile_csv(dir, &profile)?;
    if let Some(first) = checks.iter().find(|c| !c.pass) {
        return Err(Failure::verify(format!(
            "{} = {:e} exceeds tolerance {:e}",
            first.name, first.value, first.tolerance
        )));
    }
    Ok(format!("all {} checks passed", checks.len()))
}
