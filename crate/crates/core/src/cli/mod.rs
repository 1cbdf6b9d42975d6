//! The `ametric-lab` command-line front end.
//!
//! Every subcommand reads one TOML experiment file, writes one output file
//! and pairs it with `<out>.manifest.json`. Exit codes: 0 success, 1
//! property failure or divergence, 2 usage or configuration error.

mod config;
mod manifest;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{
    BaseMetricKind, ExperimentConfig, MapConfig, OutputFormat, PerturbationConfig, RunMode,
    ScheduleConfig, SpaceKind, DEFAULT_BOX, DEFAULT_SAMPLES,
};
pub use manifest::{manifest_path, sha256_hex, RunManifest};

use crate::contraction::{classify_az, estimate_delta, verify_contraction_inequalities, SelfMap};
use crate::convexity::check_convexity;
use crate::error::Error;
use crate::iteration::{mann_run, picard_run, IterationTrace, StopRule, DETECT_WINDOW};
use crate::metric::check_axioms;
use crate::sampling::UniformBox;
use crate::stability::{forward_bound_check, perturbed_run, StabilityReport, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Stop tolerance used by `run` when the config gives none.
pub const DEFAULT_RUN_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "ametric-lab",
    version,
    about = "Experiments on convex A-metric spaces and Mann iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the A-metric axioms and derived lemmas.
    CheckAxioms(CommonArgs),
    /// Sample the convexity inequality of the weighted-mean structure.
    CheckConvex(CommonArgs),
    /// Test the AZ conditions, searching constants unless [az] is given.
    ClassifyMap(CommonArgs),
    /// Estimate the contraction modulus and verify it.
    EstimateDelta(CommonArgs),
    /// Run Picard or Mann iteration and write the trace.
    Run(CommonArgs),
    /// Run a perturbed Mann orbit and report the stability verdict.
    Stability(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides output.format.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// `run` exits 0 on completion even without convergence.
    #[arg(long)]
    no_strict: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

struct Outcome {
    exit: i32,
    verdicts: Value,
    warnings: Vec<String>,
}

type Handler = fn(&Context) -> Result<Outcome, Failure>;

struct Context {
    command: &'static str,
    config: ExperimentConfig,
    config_path: PathBuf,
    config_bytes: Vec<u8>,
    seed: u64,
    out: PathBuf,
    format: OutputFormat,
    no_strict: bool,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (name, args, handler): (&'static str, CommonArgs, Handler) = match cli.command {
        Command::CheckAxioms(a) => ("check-axioms", a, cmd_check_axioms),
        Command::CheckConvex(a) => ("check-convex", a, cmd_check_convex),
        Command::ClassifyMap(a) => ("classify-map", a, cmd_classify_map),
        Command::EstimateDelta(a) => ("estimate-delta", a, cmd_estimate_delta),
        Command::Run(a) => ("run", a, cmd_run),
        Command::Stability(a) => ("stability", a, cmd_stability),
    };
    let started = Instant::now();
    let result = load(name, args).and_then(|ctx| {
        let outcome = handler(&ctx)?;
        let manifest = RunManifest::new(
            &ctx.config_path,
            &ctx.config_bytes,
            ctx.command,
            ctx.seed,
            &ctx.out,
            ctx.format,
            started.elapsed().as_secs_f64(),
            outcome.exit,
            outcome.verdicts,
            outcome.warnings,
        );
        manifest.write(&manifest_path(&ctx.out))?;
        Ok(outcome.exit)
    });
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn load(command: &'static str, args: CommonArgs) -> Result<Context, Failure> {
    let config_bytes = std::fs::read(&args.config).map_err(|e| {
        Failure::Usage(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let text = std::str::from_utf8(&config_bytes)
        .map_err(|e| Failure::Usage(format!("config is not UTF-8: {e}")))?;
    let config = ExperimentConfig::parse(text)
        .map_err(|e| Failure::Usage(format!("invalid config: {e}")))?;
    let output = config.output.clone();
    let out = args
        .out
        .or_else(|| output.as_ref().and_then(|o| o.path.clone()))
        .ok_or_else(|| Failure::Usage("no output path: set output.path or pass --out".into()))?;
    let format = args
        .format
        .or_else(|| output.and_then(|o| o.format))
        .unwrap_or_default();
    Ok(Context {
        command,
        seed: args.seed.unwrap_or(config.run.seed),
        config,
        config_path: args.config,
        config_bytes,
        out,
        format,
        no_strict: args.no_strict,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn exit_if(passed: bool) -> i32 {
    if passed {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn anchored_sampler(ctx: &Context, f: &SelfMap) -> Result<UniformBox, Failure> {
    let sampler = ctx.config.sampler(ctx.seed)?;
    Ok(match f.known_fixed_point() {
        Some(u) => sampler.with_anchor(u.clone()),
        None => sampler,
    })
}

fn cmd_check_axioms(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = &ctx.config;
    let space = cfg.build_space()?;
    let report = check_axioms(
        &space,
        &cfg.sampler(ctx.seed)?,
        cfg.samples(),
        cfg.check_tol(),
    )?;
    write_json(&ctx.out, &report)?;
    Ok(Outcome {
        exit: exit_if(report.passed),
        verdicts: json!({
            "passed": report.passed,
            "samples_checked": report.samples_checked,
            "violations": report.violations.len(),
        }),
        warnings: Vec::new(),
    })
}

fn cmd_check_convex(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = &ctx.config;
    let space = cfg.build_space()?;
    let w = cfg.build_structure()?;
    let report = check_convexity(
        &space,
        &w,
        &cfg.sampler(ctx.seed)?,
        cfg.samples(),
        cfg.check_tol(),
    )?;
    write_json(&ctx.out, &report)?;
    Ok(Outcome {
        exit: exit_if(report.passed),
        verdicts: json!({
            "passed": report.passed,
            "samples_checked": report.samples_checked,
            "violations": report.violations.len(),
        }),
        warnings: Vec::new(),
    })
}

fn cmd_classify_map(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = &ctx.config;
    let space = cfg.build_space()?;
    let f = cfg.build_map()?;
    let sampler = anchored_sampler(ctx, &f)?;
    let report = classify_az(
        &space,
        &f,
        cfg.az_params()?,
        &sampler,
        cfg.samples(),
        cfg.check_tol(),
    )?;
    write_json(&ctx.out, &report)?;
    Ok(Outcome {
        exit: exit_if(report.is_az),
        verdicts: json!({
            "is_az": report.is_az,
            "params": report.params,
            "held_counts": report.held_counts,
            "samples_checked": report.samples_checked,
            "failures": report.failures.len(),
        }),
        warnings: Vec::new(),
    })
}

fn cmd_estimate_delta(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = &ctx.config;
    let space = cfg.build_space()?;
    let f = cfg.build_map()?;
    let sampler = anchored_sampler(ctx, &f)?;
    let estimate = estimate_delta(&space, &f, &sampler, cfg.samples())?;
    let verification = if estimate.contraction {
        Some(verify_contraction_inequalities(
            &space,
            &f,
            estimate.delta_hat,
            &sampler,
            cfg.samples(),
            cfg.check_tol(),
        )?)
    } else {
        None
    };
    let passed = verification.as_ref().is_some_and(|v| v.passed);
    write_json(
        &ctx.out,
        &json!({ "estimate": estimate, "verification": verification }),
    )?;
    Ok(Outcome {
        exit: exit_if(passed),
        verdicts: json!({
            "delta_hat": estimate.delta_hat,
            "contraction": estimate.contraction,
            "verified": passed,
        }),
        warnings: Vec::new(),
    })
}

fn write_trace(ctx: &Context, trace: &IterationTrace) -> Result<(), Failure> {
    let mut w = create(&ctx.out)?;
    match ctx.format {
        OutputFormat::Csv => trace.write_csv(&mut w)?,
        OutputFormat::Jsonl => trace.write_jsonl(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_run(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = &ctx.config;
    let mode = cfg.run.mode;
    if !matches!(mode, RunMode::Picard | RunMode::Mann) {
        return Err(Failure::Usage(format!(
            "`run` needs run.mode = \"picard\" or \"mann\", got {mode:?}"
        )));
    }
    let space = cfg.build_space()?;
    let f = cfg.build_map()?;
    let x0 = cfg.x0()?;
    let stop = StopRule::new(
        cfg.n_steps()?,
        cfg.run.tol.unwrap_or(DEFAULT_RUN_TOL),
        DETECT_WINDOW,
    )?;
    let result = match mode {
        RunMode::Picard => picard_run(&space, &f, &x0, &stop),
        _ => {
            let w = cfg.build_structure()?;
            let schedule = cfg.build_schedule()?;
            mann_run(&space, &w, &f, &x0, &schedule, &stop, cfg.run.delta, None)
        }
    };
    match result {
        Ok(trace) => {
            write_trace(ctx, &trace)?;
            Ok(Outcome {
                exit: exit_if(trace.converged || ctx.no_strict),
                verdicts: json!({
                    "converged": trace.converged,
                    "steps": trace.steps.len().saturating_sub(1),
                    "limit": trace.limit,
                    "residual": trace.residual,
                }),
                warnings: Vec::new(),
            })
        }
        Err(e @ (Error::Diverged { .. } | Error::OutsideDomain { .. })) => {
            let (step, reason) = match &e {
                Error::Diverged { step, .. } => (*step, "diverged"),
                Error::OutsideDomain { step, .. } => (*step, "outside_domain"),
                _ => unreachable!(),
            };
            write_trace(ctx, e.partial_trace().expect("error carries a trace"))?;
            eprintln!("error: {e}");
            Ok(Outcome {
                exit: EXIT_FAILURE,
                verdicts: json!({ "converged": false, "stopped": reason, "step": step }),
                warnings: vec![e.to_string()],
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn write_stability(ctx: &Context, report: &StabilityReport) -> Result<(), Failure> {
    let mut w = create(&ctx.out)?;
    match ctx.format {
        OutputFormat::Csv => report.write_csv(&mut w)?,
        OutputFormat::Jsonl => report.write_jsonl(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_stability(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = &ctx.config;
    if cfg.run.mode != RunMode::Stability {
        return Err(Failure::Usage(format!(
            "`stability` needs run.mode = \"stability\", got {:?}",
            cfg.run.mode
        )));
    }
    let space = cfg.build_space()?;
    let f = cfg.build_map()?;
    let w = cfg.build_structure()?;
    let schedule = cfg.build_schedule()?;
    let perturbation = cfg.build_perturbation()?;
    let report = match perturbed_run(
        &space,
        &w,
        &f,
        &cfg.x0()?,
        &schedule,
        &perturbation,
        cfg.n_steps()?,
    ) {
        Ok(r) => r,
        Err(e @ Error::NoFixedPoint(_)) => return Err(Failure::Runtime(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let forward = cfg
        .run
        .delta
        .map(|delta| forward_bound_check(&report, delta, &schedule, space.arity()))
        .transpose()?;
    write_stability(ctx, &report)?;
    Ok(Outcome {
        exit: exit_if(report.verdict != Verdict::Violation),
        verdicts: json!({
            "verdict": report.verdict,
            "eps_limit_zero": report.eps_limit_zero,
            "y_converges_to_u": report.y_converges_to_u,
            "u": report.u,
            "forward_bound": forward,
            "notes": report.notes,
        }),
        warnings: report.warnings.clone(),
    })
}
