//! `cheeger-lab`: batch front end for eigenvalue, capacity and perturbation runs.
//!
//! Exit codes: 0 success, 1 a checked invariant failed, 2 invalid config,
//! 3 solver did not converge, 4 insufficient signal for a nonzero prediction.

mod config;
mod report;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cheeger_core::capacity::{cap1_balls, cap1_variational_with, isoperimetric_bound};
use cheeger_core::cheeger_solver::{check_certificate, solve};
use cheeger_core::geometry::pgm::{save_domain, save_field};
use cheeger_core::geometry::rasterize;
use cheeger_core::oracles::lower_bound;
use cheeger_core::perturbation_lab::{
    baseline, locate_reduced_boundary, run_diffeo_experiment, run_hole_experiment, DiffeoFamily, HoleFamily, HoleRate, SlopeReport,
};
use cheeger_core::{CompactSet, Error, Shape};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{CapacityConfig, ConfigError, Family, Overrides, PerturbConfig, SolveConfig};

/// Relative slack on the eigenvalue bounds and closed-form comparisons.
const BOUNDS_TOL: f64 = 0.01;
const CLOSED_FORM_TOL: f64 = 0.03;

#[derive(Parser)]
#[command(name = "cheeger-lab", version, about = "First 1-Laplacian eigenvalue, 1-capacity and domain perturbation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for per-δ solves.
    #[arg(long, env = "CHEEGER_LAB_THREADS")]
    threads: Option<usize>,
    /// Cells per axis, overriding the config.
    #[arg(long)]
    resolution: Option<usize>,
    /// Seed for randomized starting points, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { resolution: self.resolution, seed: self.seed, threads: self.threads }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the first eigenvalue and the eigenset of a domain.
    Solve(Common),
    /// Estimate the 1-capacity of a compact set.
    Capacity(Common),
    /// Run a perturbation family and compare with the first-order prediction.
    Perturb(Common),
    /// Merge JSON reports into one summary.
    ReportMerge {
        /// Reports to merge.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self { code: 2, message: format!("invalid config: {e}") }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Convergence(_) => 3,
            Error::InsufficientSignal(_) => 4,
            Error::Io(_) => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

type Run = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(c) => prepare(c).and_then(|_| cmd_solve(c)),
        Command::Capacity(c) => prepare(c).and_then(|_| cmd_capacity(c)),
        Command::Perturb(c) => prepare(c).and_then(|_| cmd_perturb(c)),
        Command::ReportMerge { reports, out } => cmd_merge(reports, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            log::error!("{}", f.message);
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Creates the output directory and routes the log to `run.log` inside it.
fn prepare(c: &Common) -> Result<(), Failure> {
    std::fs::create_dir_all(&c.out)?;
    let log = File::create(c.out.join("run.log"))?;
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(log)))
        .try_init();
    log::info!("cheeger-lab {} with config {}", env!("CARGO_PKG_VERSION"), c.config.display());
    Ok(())
}

#[derive(Serialize)]
struct Bounds {
    lower: f64,
    upper: f64,
    tolerance: f64,
    satisfied: bool,
}

#[derive(Serialize)]
struct SolveOutput {
    lambda: f64,
    eigenset_volume: f64,
    eigenset_ratio: f64,
    domain_volume: f64,
    domain_perimeter: f64,
    residuals: cheeger_core::cheeger_solver::Residuals,
    certificate: cheeger_core::cheeger_solver::CertificateReport,
    bounds: Bounds,
    history: Vec<f64>,
    outer_iterations: usize,
    inner_iterations: usize,
    passed: bool,
}

fn cmd_solve(c: &Common) -> Run {
    let cfg: SolveConfig = config::load(&c.config, &c.overrides())?;
    let spec = cfg.grid.spec()?;
    cfg.solver.validate()?;
    let domain = rasterize(&cfg.domain, &spec)?;
    let res = solve(&domain, &cfg.solver)?;
    let cert = check_certificate(&res, &domain, cfg.solver.certificate_tol)?;
    let m = domain.measure();
    let lower = lower_bound(spec.dim, m.volume)?;
    let upper = m.perimeter / m.volume;
    let satisfied = res.lambda >= lower * (1.0 - BOUNDS_TOL) && res.lambda <= upper * (1.0 + BOUNDS_TOL);
    let monotone = res.history.windows(2).all(|w| w[1] <= w[0]);
    let ratio_ok = res.residuals.ratio_mismatch <= cfg.solver.certificate_tol * res.lambda;
    let passed = cert.passed && satisfied && monotone && ratio_ok;
    let out = SolveOutput {
        lambda: res.lambda,
        eigenset_volume: res.eigenset.volume(),
        eigenset_ratio: res.eigenset_ratio,
        domain_volume: m.volume,
        domain_perimeter: m.perimeter,
        residuals: res.residuals,
        certificate: cert,
        bounds: Bounds { lower, upper, tolerance: BOUNDS_TOL, satisfied },
        history: res.history.clone(),
        outer_iterations: res.iterations.outer,
        inner_iterations: res.iterations.inner_total(),
        passed,
    };
    report::write_json(&c.out.join("result.json"), "solve", &cfg, &out)?;
    let peak = res.u.values.iter().cloned().fold(0.0, f64::max);
    save_field(&c.out.join("u.pgm"), &spec, &res.u.values, peak, &domain.analytic)?;
    save_domain(&c.out.join("eigenset.pgm"), &res.eigenset)?;
    log::info!("λ = {:.8}, eigenset volume {:.6}, passed {passed}", res.lambda, out.eigenset_volume);
    println!("lambda = {:.8}", res.lambda);
    Ok(if passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct ClosedForm {
    value: f64,
    relative_error: f64,
    overlap_fallback: bool,
}

#[derive(Serialize)]
struct CapacityOutput {
    value: f64,
    lower: f64,
    iterations: usize,
    closed_form: Option<ClosedForm>,
    isoperimetric_lhs: f64,
    isoperimetric_rhs: f64,
    warnings: Vec<String>,
    passed: bool,
}

/// Balls of a ball or of a union of balls.
fn balls(shape: &Shape) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    match shape {
        Shape::Ball { center, radius } => Some((vec![center.clone()], vec![*radius])),
        Shape::Union { parts } => {
            let (mut cs, mut rs) = (Vec::new(), Vec::new());
            for p in parts {
                let (c, r) = balls(p)?;
                cs.extend(c);
                rs.extend(r);
            }
            Some((cs, rs))
        }
        _ => None,
    }
}

fn cmd_capacity(c: &Common) -> Run {
    let cfg: CapacityConfig = config::load(&c.config, &c.overrides())?;
    let spec = cfg.grid.spec()?;
    let k = CompactSet(rasterize(&cfg.set, &spec)?);
    let est = cap1_variational_with(&k, &spec, &cfg.options)?;
    let mut warnings = Vec::new();
    let closed_form = match balls(&cfg.set) {
        Some((cs, rs)) if !cs.is_empty() => {
            let b = cap1_balls(&cs, &rs, &spec)?;
            if b.overlap_fallback {
                warnings.push("balls overlap; closed form replaced by the variational estimate of the union".into());
            }
            let formula = if b.overlap_fallback { est.value } else { b.value };
            Some(ClosedForm {
                value: formula,
                relative_error: if formula > 0.0 { (est.value / formula - 1.0).abs() } else { 0.0 },
                overlap_fallback: b.overlap_fallback,
            })
        }
        _ if matches!(cfg.set, Shape::Empty) => Some(ClosedForm { value: 0.0, relative_error: 0.0, overlap_fallback: false }),
        _ => None,
    };
    let iso = isoperimetric_bound(&k)?;
    let passed = est.value >= 0.0
        && iso.lhs <= iso.rhs * (1.0 + CLOSED_FORM_TOL) + f64::EPSILON
        && closed_form.as_ref().is_none_or(|f| f.relative_error <= CLOSED_FORM_TOL);
    let out = CapacityOutput {
        value: est.value,
        lower: est.lower,
        iterations: est.iterations,
        closed_form,
        isoperimetric_lhs: iso.lhs,
        isoperimetric_rhs: iso.rhs,
        warnings,
        passed,
    };
    for w in &out.warnings {
        log::warn!("{w}");
    }
    report::write_json(&c.out.join("capacity.json"), "capacity", &cfg, &out)?;
    log::info!("cap1 = {:.8}, passed {passed}", est.value);
    println!("capacity = {:.8}", est.value);
    Ok(if passed { 0 } else { 1 })
}

fn run_family(cfg: &PerturbConfig) -> Result<SlopeReport, Failure> {
    let spec = cfg.grid.spec()?;
    let opts = &cfg.options;
    match &cfg.family {
        Family::Hole { domain, centers, rates, dominant, deltas, regime, snap_to_boundary_from } => {
            let base_domain = rasterize(domain, &spec)?;
            let base = baseline(&base_domain, opts)?;
            let mut centers = centers.clone();
            if let (Some(from), Some(c)) = (snap_to_boundary_from, centers.get_mut(*dominant)) {
                let far: Vec<f64> = from.iter().zip(c.iter()).map(|(f, x)| f + 2.0 * (x - f)).collect();
                *c = locate_reduced_boundary(&base.result.eigenset, from, &far);
                log::info!("dominant centre moved to the reduced boundary at {c:?}");
            }
            let rates = rates.clone().unwrap_or_else(|| vec![HoleRate { scale: 1.0, exponent: 1.0 }; centers.len()]);
            let fam = HoleFamily { base: base_domain, centers, rates, dominant: *dominant, deltas: deltas.clone() };
            Ok(run_hole_experiment(&fam, *regime, &base, opts)?)
        }
        Family::Diffeo { shape, rate, remainder, deltas } => {
            let fam = DiffeoFamily { shape: shape.clone(), spec, rate: *rate, remainder: remainder.clone(), deltas: deltas.clone() };
            let base = baseline(&fam.base_domain()?, opts)?;
            Ok(run_diffeo_experiment(&fam, &base, opts)?)
        }
    }
}

fn cmd_perturb(c: &Common) -> Run {
    let cfg: PerturbConfig = config::load(&c.config, &c.overrides())?;
    let rep = run_family(&cfg)?;
    report::write_csv(&c.out.join("samples.csv"), &rep)?;
    report::write_json(&c.out.join("summary.json"), "perturb", &cfg, &rep)?;
    std::fs::write(c.out.join("plot.svg"), report::svg_plot(&rep))?;
    for w in &rep.warnings {
        log::warn!("{w}");
    }
    for k in &rep.checks {
        log::info!("{}: {} ({})", k.name, if k.passed { "passed" } else { "failed" }, k.detail);
    }
    if let Some(f) = rep.fit {
        println!("fitted slope {:?} (predicted {:.6}), exponent {:.4}", f.coefficient, rep.predicted_coefficient, f.exponent);
    }
    if let Some(reason) = &rep.inconclusive {
        if rep.predicted_coefficient != 0.0 {
            return Err(Failure { code: 4, message: format!("insufficient signal: {reason}") });
        }
        println!("inconclusive: below noise floor");
    }
    println!("{}", if rep.passed { "passed" } else { "failed" });
    Ok(if rep.passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct MergedEntry {
    file: String,
    command: String,
    passed: bool,
    report: serde_json::Value,
}

#[derive(Serialize)]
struct Merged {
    reports: Vec<MergedEntry>,
    passed: bool,
}

fn cmd_merge(reports: &[PathBuf], out: &Path) -> Run {
    std::fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for p in reports {
        let text = std::fs::read_to_string(p)?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure { code: 2, message: format!("{}: {e}", p.display()) })?;
        let command = v.get("command").and_then(|c| c.as_str()).unwrap_or("unknown").to_string();
        let passed = v.pointer("/result/passed").and_then(|b| b.as_bool()).unwrap_or(false);
        let file = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        entries.push(MergedEntry { file, command, passed, report: v });
    }
    let merged = Merged { passed: entries.iter().all(|e| e.passed), reports: entries };
    let none: Option<()> = None;
    report::write_json(&out.join("merged.json"), "report-merge", &none, &merged)?;
    println!("{} reports merged, {}", merged.reports.len(), if merged.passed { "all passed" } else { "some failed" });
    Ok(if merged.passed { 0 } else { 1 })
}
