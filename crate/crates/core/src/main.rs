//! Command-line front end: solves, branches, Λ brackets, α-sweeps, and the
//! verification suite, driven by a JSON config.
//!
//! Exit codes: 0 ok, 1 validation error, 2 solver failure, 3 verification
//! failure.

use clap::{Args, Parser, Subcommand};
use fracmix::config::{ExperimentConfig, GridScale, GridSpec};
use fracmix::continuation::{
    alpha_sweep, bifurcation_branch_q1, continue_minimal_branch, estimate_lambda_star,
    MinimalSolver,
};
use fracmix::error::Error;
use fracmix::mesh::{build_mesh, build_partition, validate_family, PartitionFamily};
use fracmix::output::{
    self, LambdaStarSummary, RecordSummary, RunMeta, TraceSummary,
};
use fracmix::solve::{monotone_iteration, mountain_pass_solve, MonotoneOpts, MountainPassOpts};
use fracmix::spectral::{assemble, eigendecompose, EigenBasis, FractionalOperator};
use fracmix::verify::{run_verification, FaultInjection};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "fracmix", version, about = "Solver suite for (-Δ)^s u = λu^q + u^r with mixed boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep fan-out.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed override for randomized probes.
    #[arg(long)]
    seed: Option<u64>,
    /// Solver tolerance override (Newton residual and monotone increment).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// One (λ, α) solve: minimal solution plus a mountain-pass attempt.
    Solve(Common),
    /// Minimal branch (q < 1) or bifurcation diagram (q = 1) over a λ-grid.
    Branch(Common),
    /// Bracket the extremal parameter Λ with certificates.
    LambdaStar(Common),
    /// Moving-boundary sweep over a nested α family.
    AlphaSweep(Common),
    /// Run the invariant verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Print measured margins per check.
        #[arg(long)]
        verbose: bool,
        /// Negative control: perturb an eigenvalue and expect a failure.
        #[arg(long)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidDomain(_)
        | Error::InvalidPartition(_)
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::Serde(_) => 1,
        _ => 2,
    }
}

struct Setup {
    config: ExperimentConfig,
    meta: RunMeta,
    out_dir: PathBuf,
}

fn load_setup(common: &Common, default_config: Option<ExperimentConfig>) -> Result<Setup, Error> {
    let mut config = match (&common.config, default_config) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::from_json(&text)?
        }
        (None, Some(fallback)) => fallback,
        (None, None) => {
            return Err(Error::invalid_param("--config", "required for this command"))
        }
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(tol) = common.tol {
        if !(tol > 0.0) {
            return Err(Error::invalid_param("--tol", "must be positive"));
        }
        config.tolerances.newton = tol;
        config.tolerances.monotone_increment = tol;
    }
    config.validate()?;
    if let Some(jobs) = common.jobs {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let meta = RunMeta::new(&config.to_json(), config.seed);
    let out_dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("config.json"), config.to_json())?;
    Ok(Setup {
        config,
        meta,
        out_dir,
    })
}

struct Problem {
    basis: Arc<EigenBasis>,
    fop: Arc<FractionalOperator>,
    coords: Vec<[f64; 2]>,
}

fn build_problem(config: &ExperimentConfig) -> Result<Problem, Error> {
    let mesh = build_mesh(&config.domain)?;
    let partition = build_partition(&mesh, config.partition.alpha, config.partition.rule)?;
    let lap = assemble(&mesh, &partition)?;
    let basis = Arc::new(eigendecompose(&lap)?);
    let fop = Arc::new(FractionalOperator::new(basis.clone(), config.problem.s)?);
    Ok(Problem {
        basis,
        fop,
        coords: mesh.coords,
    })
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Solve(common) => cmd_solve(&common),
        Command::Branch(common) => cmd_branch(&common),
        Command::LambdaStar(common) => cmd_lambda_star(&common),
        Command::AlphaSweep(common) => cmd_alpha_sweep(&common),
        Command::Verify {
            common,
            verbose,
            inject_fault,
        } => cmd_verify(&common, verbose, inject_fault),
    }
}

#[derive(Serialize)]
struct SolveOutput {
    minimal: Option<RecordSummary>,
    minimal_trace: Option<TraceSummary>,
    mountain_pass: Option<RecordSummary>,
    mountain_pass_error: Option<String>,
    lambda1s: f64,
}

fn cmd_solve(common: &Common) -> Result<u8, Error> {
    let setup = load_setup(common, None)?;
    let config = &setup.config;
    let problem = build_problem(config)?;
    let fop = &problem.fop;
    let params = config.problem;
    let monotone_opts = MonotoneOpts {
        increment_tol: config.tolerances.monotone_increment,
        polish_tol: Some(config.tolerances.newton),
        ..Default::default()
    };

    let (minimal, trace) = if params.q < 1.0 {
        let solver = MinimalSolver::new(fop.clone(), &params)?;
        let superr = fracmix::solve::build_supersolution(&params, &solver.torsion)?;
        let sub = solver.subsolution(params.lambda)?;
        let (rec, trace) = monotone_iteration(fop, &params, &sub, &superr.h, &monotone_opts)?;
        (Some(rec), Some(trace))
    } else {
        // q = 1: the trivial solution is the minimum; the nontrivial branch
        // point is reported through the mountain-pass attempt below.
        (None, None)
    };

    let base = minimal
        .as_ref()
        .map(|r| r.u.clone())
        .unwrap_or_else(|| nalgebra::DVector::zeros(fop.ndofs()));
    let mp_opts = MountainPassOpts {
        newton_tol: config.tolerances.newton,
        ..Default::default()
    };
    let mp = mountain_pass_solve(fop, &params, &base, &mp_opts);

    let output = SolveOutput {
        minimal: minimal.as_ref().map(RecordSummary::of),
        minimal_trace: trace.as_ref().map(TraceSummary::of),
        mountain_pass: mp.as_ref().ok().map(|(r, _)| RecordSummary::of(r)),
        mountain_pass_error: mp.as_ref().err().map(|e| e.to_string()),
        lambda1s: fop.first_eigenvalue_s(),
    };
    output::write_json(&setup.out_dir.join("solve.json"), &setup.meta, &output)?;
    if let Some(rec) = &minimal {
        output::write_field_csv(
            &setup.out_dir.join("minimal_field.csv"),
            &setup.meta,
            &problem.basis,
            &problem.coords,
            &rec.u,
        )?;
    }
    if let Ok((rec, _)) = &mp {
        output::write_field_csv(
            &setup.out_dir.join("mountain_pass_field.csv"),
            &setup.meta,
            &problem.basis,
            &problem.coords,
            &rec.u,
        )?;
    }
    output::write_eigenvalues_csv(
        &setup.out_dir.join("eigenvalues.csv"),
        &setup.meta,
        &problem.basis,
    )?;
    println!(
        "solve: lambda={} minimal_sup={:?} mountain_pass_sup={:?}",
        params.lambda,
        output.minimal.as_ref().map(|r| r.sup_norm),
        output.mountain_pass.as_ref().map(|r| r.sup_norm)
    );
    Ok(0)
}

fn cmd_branch(common: &Common) -> Result<u8, Error> {
    let setup = load_setup(common, None)?;
    let config = &setup.config;
    let problem = build_problem(config)?;
    let fop = &problem.fop;
    let template = config.problem;

    let branch = if template.q < 1.0 {
        let solver = MinimalSolver::new(fop.clone(), &template)?;
        let lambda0 = solver.feasibility_bound();
        let grid = resolve_grid(
            config.lambda_grid.as_ref(),
            lambda0,
            fop.first_eigenvalue_s(),
            &GridSpec {
                values: None,
                lo: Some(0.05),
                hi: Some(0.9),
                count: Some(10),
                spacing: None,
                relative_to: Some(GridScale::FeasibilityBound),
            },
        )?;
        continue_minimal_branch(fop, &template, &grid)?
    } else {
        let l1s = fop.first_eigenvalue_s();
        let default = GridSpec {
            values: None,
            lo: Some(1e-3),
            hi: Some(1.0 - 1e-3),
            count: Some(12),
            spacing: Some(fracmix::config::GridSpacing::Geometric),
            relative_to: Some(GridScale::Lambda1s),
        };
        let mut grid = resolve_grid(config.lambda_grid.as_ref(), 0.0, l1s, &default)?;
        grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
        bifurcation_branch_q1(fop, &template, &grid)?
    };

    output::write_branch_csv(&setup.out_dir.join("branch.csv"), &setup.meta, &branch)?;
    #[derive(Serialize)]
    struct BranchSummary {
        kind: String,
        points: Vec<RecordSummary>,
        nu1: Vec<f64>,
        truncated_at: Option<f64>,
    }
    let summary = BranchSummary {
        kind: format!("{:?}", branch.kind).to_lowercase(),
        points: branch
            .points
            .iter()
            .map(|p| RecordSummary::of(&p.record))
            .collect(),
        nu1: branch.points.iter().map(|p| p.nu1).collect(),
        truncated_at: branch.truncated_at,
    };
    output::write_json(&setup.out_dir.join("branch.json"), &setup.meta, &summary)?;
    if let Some(lambda) = branch.truncated_at {
        println!("branch: truncated at lambda={lambda} (supersolution infeasible)");
    }
    println!("branch: {} points written", branch.points.len());
    Ok(0)
}

fn resolve_grid(
    spec: Option<&GridSpec>,
    feasibility_bound: f64,
    lambda1s: f64,
    default: &GridSpec,
) -> Result<Vec<f64>, Error> {
    let spec = spec.unwrap_or(default);
    let scale = match spec.relative_to {
        Some(GridScale::FeasibilityBound) => feasibility_bound,
        Some(GridScale::Lambda1s) => lambda1s,
        None => 1.0,
    };
    spec.resolve(scale)
}

fn cmd_lambda_star(common: &Common) -> Result<u8, Error> {
    let setup = load_setup(common, None)?;
    let config = &setup.config;
    let problem = build_problem(config)?;
    let fop = &problem.fop;
    let resolution =
        config.lambda_star_resolution.unwrap_or(1e-3) * fop.first_eigenvalue_s();
    let est = estimate_lambda_star(fop, &config.problem, resolution)?;
    #[derive(Serialize)]
    struct Full {
        summary: LambdaStarSummary,
        lambda1s: f64,
        probes: Vec<fracmix::continuation::Probe>,
    }
    let doc = Full {
        summary: LambdaStarSummary::of(&est),
        lambda1s: fop.first_eigenvalue_s(),
        probes: est.probes.clone(),
    };
    output::write_json(&setup.out_dir.join("lambda_star.json"), &setup.meta, &doc)?;
    println!(
        "lambda-star: bracket [{}, {}] width {} ({} probes)",
        est.lower,
        est.upper,
        est.width(),
        est.probes.len()
    );
    Ok(0)
}

fn cmd_alpha_sweep(common: &Common) -> Result<u8, Error> {
    let setup = load_setup(common, None)?;
    let config = &setup.config;
    let alphas = config
        .alphas
        .clone()
        .ok_or_else(|| Error::invalid_param("alphas", "required for alpha-sweep"))?;
    let family = PartitionFamily::new(config.domain.clone(), alphas, config.partition.rule)?;
    // Fail fast on a family that violates the nesting hypotheses.
    let mesh = build_mesh(&family.domain)?;
    let parts: Result<Vec<_>, Error> = family
        .alphas
        .iter()
        .map(|&a| build_partition(&mesh, a, family.rule).map(|p| (a, p)))
        .collect();
    let report = validate_family(&mesh, &parts?, 4);
    if !report.pass {
        return Err(Error::InvalidPartition(format!(
            "family fails (B₁)-(B₃): {:?}",
            report.failures
        )));
    }
    let protocol = config.sweep.clone().unwrap_or_default();
    let sweep = alpha_sweep(&family, &config.problem, &protocol)?;
    output::write_sweep_csv(&setup.out_dir.join("alpha_sweep.csv"), &setup.meta, &sweep)?;
    output::write_json(&setup.out_dir.join("alpha_sweep.json"), &setup.meta, &sweep)?;
    let failures = sweep.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "alpha-sweep: {} rows ({} failed), lambda1s decreasing: {}",
        sweep.rows.len(),
        failures,
        sweep.trends.lambda1s_strictly_decreasing
    );
    if failures > 0 {
        return Ok(2);
    }
    Ok(0)
}

fn cmd_verify(common: &Common, verbose: bool, inject_fault: bool) -> Result<u8, Error> {
    let setup = load_setup(common, Some(ExperimentConfig::default_verify()))?;
    let fault = if inject_fault {
        FaultInjection::PerturbEigenvalue
    } else {
        FaultInjection::None
    };
    let report = run_verification(&setup.config, fault)?;
    for c in &report.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        if verbose {
            println!(
                "{tag} {name}: measured {measured:.6e} vs threshold {threshold:.6e} {detail}",
                name = c.name,
                measured = c.measured,
                threshold = c.threshold,
                detail = if c.detail.is_empty() {
                    String::new()
                } else {
                    format!("({})", c.detail)
                }
            );
        } else {
            println!("{tag} {}", c.name);
        }
    }
    output::write_json(&setup.out_dir.join("verify.json"), &setup.meta, &report)?;
    println!("verify: {} passed, {} failed", report.passed, report.failed);
    if report.all_pass() {
        Ok(0)
    } else {
        Ok(3)
    }
}
