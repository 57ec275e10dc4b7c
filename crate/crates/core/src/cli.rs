//! Command-line front end.
//!
//! Exit codes: 0 all checks pass, 1 a check failed (report written), 2 usage
//! or configuration error, 3 runtime fault. `<out>/summary.json` is written
//! on every exit path that gets far enough to know `<out>`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis::checks::{bound_scenario, constraint_checks, operator_checks, CheckResult, BOUND_SCENARIOS};
use crate::analysis::convergence::{converge_eps, EpsKind};
use crate::analysis::uniqueness::{uniqueness_experiment, Perturbation, PerturbationShape, DELTA};
use crate::config::{load_config_with_overrides, parse_override, AdvectionScheme, Config, InitialKind};
use crate::error::{Error, Result};
use crate::stepper::mms::mms_study;
use crate::stepper::run::{run, with_threads, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mpe", version, about = "Moist primitive-equation simulator and verification suite")]
pub struct Cli {
    /// Configuration file (sectioned key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override `section.key=value`; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Worker threads; 1 gives bit-exact reruns.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for random initial data and random operator checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    pub overwrite: bool,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub dump_defaults: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scenario {
    Rest,
    WarmBubble,
    SaturatedBlob,
    BarotropicDecay,
}

impl From<Scenario> for InitialKind {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::Rest => InitialKind::Rest,
            Scenario::WarmBubble => InitialKind::WarmBubble,
            Scenario::SaturatedBlob => InitialKind::SaturatedBlob,
            Scenario::BarotropicDecay => InitialKind::BarotropicDecay,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Which {
    Eps1,
    Eps2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Shape {
    Velocity,
    Vapor,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scheme {
    Centered,
    Upwind,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the configured scenario.
    Run,
    /// Discrete identities of the operators and the continuity constraint.
    VerifyOperators {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        fields: usize,
    },
    /// Maximum-principle bounds on the rest, warm-bubble and saturated-blob scenarios.
    VerifyBounds {
        #[arg(long, default_value_t = 500)]
        steps: usize,
    },
    /// Regularization-limit study in eps1 or eps2.
    ConvergeEps {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, value_enum, default_value = "saturated-blob")]
        scenario: Scenario,
    },
    /// Paired runs from perturbed initial data.
    Uniqueness {
        #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-5,1e-6")]
        amplitudes: Vec<f64>,
        #[arg(long, value_enum, default_value = "velocity")]
        shape: Shape,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Envelope constant; fitted on the smallest amplitude when absent.
        #[arg(long)]
        a7_constant: Option<f64>,
        #[arg(long, value_enum, default_value = "saturated-blob")]
        scenario: Scenario,
    },
    /// Manufactured-solution convergence study.
    Mms {
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        grids: Vec<usize>,
        #[arg(long, value_enum, default_value = "centered")]
        scheme: Scheme,
        #[arg(long, default_value_t = 0.1)]
        t_end: f64,
    },
}

/// Outcome of a subcommand: pass flag and the JSON report.
struct Report {
    pass: bool,
    body: Value,
}

fn exit_code_for(e: &Error) -> i32 {
    if e.is_runtime_fault() {
        EXIT_RUNTIME
    } else {
        EXIT_USAGE
    }
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = match &cli.config {
        Some(p) => load_config_with_overrides(p, &overrides)?,
        None => Config::from_str_with_overrides("", &overrides)?,
    };
    if let Some(seed) = cli.seed {
        cfg.run.initial.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_table(rows: &[CheckResult]) {
    println!("{:<58} {:>14} {:>10}  result", "check", "value", "tol");
    for r in rows {
        let tol = if r.tol.is_finite() { format!("{:.1e}", r.tol) } else { "report".into() };
        println!(
            "{:<58} {:>14.6e} {:>10}  {}",
            r.name,
            r.value,
            tol,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
}

fn cmd_run(cfg: &Config, overwrite: bool) -> Result<Report> {
    let out = run(
        cfg,
        &RunOptions {
            overwrite,
            progress: true,
            dry: false,
        },
    )?;
    let flagged: Vec<_> = out.series.iter().filter(|r| r.any_flag()).collect();
    let last = out.series.last().expect("initial record");
    println!(
        "{} steps to t = {:e}; {} records with bound flags",
        out.state.step,
        out.state.time,
        flagged.len()
    );
    Ok(Report {
        pass: flagged.is_empty(),
        body: json!({
            "steps": out.state.step,
            "time": out.state.time,
            "limits": out.limits,
            "final": last,
            "flagged_records": flagged.len(),
            "first_violation": flagged.first().map(|r| &r.violations),
            "manifest": out.manifest_path,
        }),
    })
}

fn cmd_verify_operators(n: usize, fields: usize, seed: u64) -> Result<Report> {
    let mut rows = operator_checks(n, fields, seed);
    rows.extend(constraint_checks(2 * n, 2 * n, n, fields.min(5), seed)?);
    print_table(&rows);
    Ok(Report {
        pass: rows.iter().all(|r| r.pass),
        body: json!({ "checks": rows }),
    })
}

fn cmd_verify_bounds(cfg: &Config, steps: usize) -> Result<Report> {
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for (name, kind) in BOUND_SCENARIOS {
        let b = bound_scenario(cfg, name, kind, steps)?;
        let worst = b.violations.iter().map(|v| v.excess).fold(0.0, f64::max);
        rows.push(CheckResult::new(format!("{name}: worst excess over bounds"), worst, 0.0));
        details.push(b);
    }
    print_table(&rows);
    for d in &details {
        for v in &d.violations {
            println!(
                "  {}: {} = {:.6e} at ({}, {}, {}), bound {:.6e}",
                d.scenario, v.field, v.value, v.i, v.j, v.k, v.bound
            );
        }
    }
    Ok(Report {
        pass: rows.iter().all(|r| r.pass),
        body: json!({ "scenarios": details }),
    })
}

fn cmd_converge_eps(cfg: &Config, which: Which, values: &[f64], steps: usize) -> Result<Report> {
    let kind = match which {
        Which::Eps1 => EpsKind::Eps1,
        Which::Eps2 => EpsKind::Eps2,
    };
    let r = converge_eps(cfg, kind, values, steps)?;
    for (v, d) in r.values.iter().zip(&r.diffs) {
        println!("{:?} = {:e}: distance {:.6e}", kind, v, d);
    }
    let pass = match kind {
        EpsKind::Eps2 => r.decreasing,
        EpsKind::Eps1 => r.decreasing && r.ratios.iter().all(|q| (5.0..=20.0).contains(q)),
    };
    Ok(Report {
        pass,
        body: serde_json::to_value(&r)?,
    })
}

fn cmd_uniqueness(cfg: &Config, amplitudes: &[f64], shape: Shape, steps: usize, a7: Option<f64>) -> Result<Report> {
    let shape = match shape {
        Shape::Velocity => PerturbationShape::Velocity,
        Shape::Vapor => PerturbationShape::Vapor,
    };
    let zero = uniqueness_experiment(cfg, Perturbation { amplitude: 0.0, shape }, steps, DELTA, Some(0.0))?;
    let zero_ok = zero.metrics.iter().all(|m| m.psi == 0.0);
    let mut amps = amplitudes.to_vec();
    amps.sort_by(|a, b| a.total_cmp(b));
    let c = match a7 {
        Some(c) => c,
        None => {
            let smallest = amps.first().copied().unwrap_or(1e-6);
            uniqueness_experiment(cfg, Perturbation { amplitude: smallest, shape }, steps, DELTA, None)?.a7_ratio_max
        }
    };
    let reports = amps
        .iter()
        .map(|&a| uniqueness_experiment(cfg, Perturbation { amplitude: a, shape }, steps, DELTA, Some(c)))
        .collect::<Result<Vec<_>>>()?;
    let mut pass = zero_ok;
    let mut scaling = Vec::new();
    for w in reports.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let expect = (b.perturbation.amplitude / a.perturbation.amplitude).powi(2);
        let q = (b.psi_final / a.psi_final) / expect;
        pass &= (1.0 / 3.0..=3.0).contains(&q);
        scaling.push(q);
    }
    for r in &reports {
        pass &= r.envelope_ratio_max <= 1.0;
        println!(
            "amplitude {:e}: psi0 {:.6e} psi_final {:.6e} envelope ratio {:.4}",
            r.perturbation.amplitude, r.psi0, r.psi_final, r.envelope_ratio_max
        );
    }
    println!("zero perturbation identical: {zero_ok}; a7 constant {c:.6e}");
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "amplitude": r.perturbation.amplitude,
                "psi0": r.psi0,
                "psi_final": r.psi_final,
                "a7_ratio_max": r.a7_ratio_max,
                "envelope_ratio_max": r.envelope_ratio_max,
                "dt": r.dt,
            })
        })
        .collect();
    Ok(Report {
        pass,
        body: json!({
            "delta": DELTA,
            "steps": steps,
            "a7_constant": c,
            "zero_perturbation_identical": zero_ok,
            "runs": summary,
            "scaling_over_amplitude_squared": scaling,
        }),
    })
}

fn cmd_mms(grids: &[usize], scheme: Scheme, t_end: f64) -> Result<Report> {
    let (scheme, min_slope) = match scheme {
        Scheme::Centered => (AdvectionScheme::Centered, 1.8),
        Scheme::Upwind => (AdvectionScheme::Upwind, 0.8),
    };
    let r = mms_study(grids, scheme, t_end)?;
    for (n, e) in r.grids.iter().zip(&r.errors) {
        println!("n = {n:4}: L2 error {e:.6e}");
    }
    println!("slopes {:?}, fitted {:.4}", r.slopes, r.fit_slope);
    Ok(Report {
        pass: r.fit_slope >= min_slope,
        body: serde_json::to_value(&r)?,
    })
}

fn write_summary(dir: &Path, command: &str, status: &str, code: i32, body: Value) {
    let doc = json!({
        "command": command,
        "status": status,
        "exit_code": code,
        "report": body,
    });
    let path = dir.join("summary.json");
    let res = std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap_or_default()));
    if let Err(e) = res {
        eprintln!("error: cannot write {}: {e}", path.display());
    }
}

fn command_name(c: &Option<Command>) -> &'static str {
    match c {
        None => "none",
        Some(Command::Run) => "run",
        Some(Command::VerifyOperators { .. }) => "verify-operators",
        Some(Command::VerifyBounds { .. }) => "verify-bounds",
        Some(Command::ConvergeEps { .. }) => "converge-eps",
        Some(Command::Uniqueness { .. }) => "uniqueness",
        Some(Command::Mms { .. }) => "mms",
    }
}

fn dispatch(cli: &Cli, cfg: &Config) -> Result<Report> {
    let seed = cli.seed.unwrap_or(cfg.run.initial.seed);
    let with = |kind: Scenario| {
        let mut c = cfg.clone();
        c.run.initial.kind = kind.into();
        c
    };
    match cli.command.as_ref().expect("checked by caller") {
        Command::Run => cmd_run(cfg, cli.overwrite),
        Command::VerifyOperators { n, fields } => cmd_verify_operators(*n, *fields, seed),
        Command::VerifyBounds { steps } => cmd_verify_bounds(cfg, *steps),
        Command::ConvergeEps {
            which,
            values,
            steps,
            scenario,
        } => cmd_converge_eps(&with(*scenario), *which, values, *steps),
        Command::Uniqueness {
            amplitudes,
            shape,
            steps,
            a7_constant,
            scenario,
        } => cmd_uniqueness(&with(*scenario), amplitudes, *shape, *steps, *a7_constant),
        Command::Mms { grids, scheme, t_end } => cmd_mms(grids, *scheme, *t_end),
    }
}

/// Parses `args` and runs the selected subcommand; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = command_name(&cli.command);
    let fallback_out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            write_summary(&fallback_out, name, "error", EXIT_USAGE, json!({ "error": e.to_string() }));
            return EXIT_USAGE;
        }
    };
    if cli.dump_defaults {
        print!("{}", cfg.to_config_string());
        return EXIT_OK;
    }
    if cli.command.is_none() {
        eprintln!("error: a subcommand is required (see --help)");
        return EXIT_USAGE;
    }
    let out_dir = cfg.run.out_dir.clone();
    let result = with_threads(cli.threads, || dispatch(&cli, &cfg)).and_then(|r| r);
    let (code, status, body) = match result {
        Ok(r) if r.pass => (EXIT_OK, "pass", r.body),
        Ok(r) => (EXIT_CHECK_FAILED, "fail", r.body),
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code_for(&e);
            (code, if code == EXIT_RUNTIME { "fault" } else { "error" }, json!({ "error": e.to_string() }))
        }
    };
    write_summary(&out_dir, name, status, code, body);
    code
}
