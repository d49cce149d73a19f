//! `sharpomp` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sharpomp_core::instances::{gamma_upper_l2, gamma_upper_linf};
use sharpomp_core::io::{parse_matrix, parse_vector, write_matrix, write_vector};
use sharpomp_core::{
    build_counterexample_l2, build_counterexample_linf, build_example1, build_example2, build_example3, exact_ric_all_orders,
    exact_ric_with, linf_stopping_threshold, run_experiment, run_omp_with, DenseMatrix, Error, ExperimentConfig, Instance,
    NoiseModel, OmpOptions, RicOptions, RicReport, StoppingRule, TieBreak,
};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "sharpomp", version, about = "OMP recovery under sharp RIP conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orthogonal Matching Pursuit.
    Omp {
        #[command(subcommand)]
        command: OmpCommand,
    },
    /// Exact restricted isometry constant by subset enumeration.
    Ric(RicArgs),
    /// Build a counterexample or worked-example instance.
    Construct(ConstructArgs),
    /// Run a seeded experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum OmpCommand {
    /// Run OMP on y = Ax + v and print the trace as JSON.
    Run(OmpRunArgs),
}

#[derive(Args)]
struct OmpRunArgs {
    /// Matrix file, one comma-separated row per line.
    #[arg(long, required_unless_present = "instance", conflicts_with = "instance")]
    matrix: Option<PathBuf>,
    /// Measurement vector file (one row or one column).
    #[arg(long, required_unless_present = "instance", conflicts_with = "instance")]
    measurement: Option<PathBuf>,
    /// Instance JSON as written by `construct`; supplies A and y = Ax + v.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// fixed:K, l2:EPS, linf:EPS, corr-linf:THRESHOLD or naive-linf:EPS.
    #[arg(long)]
    rule: String,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Break correlation ties at random with this seed instead of by smallest index.
    #[arg(long)]
    tie_seed: Option<u64>,
    /// Sparsity K used by `linf:EPS`.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Compute delta_2 and delta_(K+1) for `linf:EPS` exactly.
    #[arg(long, conflicts_with_all = ["delta2", "delta_k1"])]
    exact_ric: bool,
    /// delta_2 for `linf:EPS`; defaults to --delta-k1.
    #[arg(long)]
    delta2: Option<f64>,
    /// delta_(K+1) for `linf:EPS`.
    #[arg(long)]
    delta_k1: Option<f64>,
    /// Use the unit-norm-column form of the l-infinity threshold.
    #[arg(long)]
    unit_norm: bool,
    #[arg(long, default_value_t = RicOptions::default().budget)]
    budget: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RicArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    order: usize,
    /// Report every order 1..=ORDER.
    #[arg(long)]
    all_orders: bool,
    /// Maximum number of subsets to enumerate per order.
    #[arg(long, default_value_t = RicOptions::default().budget)]
    budget: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructKind {
    L2,
    Linf,
    Example1,
    Example2,
    Example3,
}

#[derive(Args)]
struct ConstructArgs {
    kind: ConstructKind,
    /// Sparsity (l2, linf).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delta: f64,
    /// Noise level (l2, linf).
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// gamma as a fraction of its open upper bound (l2, linf).
    #[arg(long, default_value_t = 0.9, conflicts_with = "gamma")]
    gamma_fraction: f64,
    /// Absolute gamma (l2, linf).
    #[arg(long)]
    gamma: Option<f64>,
    /// Signal magnitude for the worked examples.
    #[arg(long)]
    a: Option<f64>,
    /// Instance JSON path; without it the instance is printed with the certification.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write A in the matrix text format.
    #[arg(long)]
    matrix_out: Option<PathBuf>,
    /// Also write y = Ax + v in the matrix text format.
    #[arg(long)]
    measurement_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results CSV; defaults to the config's `output`, else stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Summary JSON path; defaults to stdout (stderr when the CSV goes to stdout).
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            Error::Parse { .. } | Error::InvalidArgument(_) | Error::Io(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Failure { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        match error.downcast_ref::<Error>() {
            Some(e) => Failure { code: Failure::from(e.clone()).code, error },
            None => Failure { code: EXIT_USAGE, error },
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, error: anyhow::anyhow!(msg.into()) }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_matrix(path: &Path) -> anyhow::Result<DenseMatrix> {
    parse_matrix(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_vector(path: &Path) -> anyhow::Result<Vec<f64>> {
    parse_vector(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn resolve_rule(args: &OmpRunArgs, a: &DenseMatrix) -> std::result::Result<StoppingRule, Failure> {
    let Some(eps) = args.rule.strip_prefix("linf:") else {
        return Ok(args.rule.parse()?);
    };
    let eps: f64 = eps
        .trim()
        .parse()
        .map_err(|e| usage(format!("rule spec `{}`: {e}", args.rule)))?;
    let k = args.sparsity.ok_or_else(|| usage("`linf:EPS` needs --sparsity"))?;
    let (delta2, delta_k1) = if args.exact_ric {
        let options = RicOptions { budget: args.budget, ..RicOptions::default() };
        let d2 = if a.cols() >= 2 { exact_ric_with(a, 2, &options)?.delta } else { 0.0 };
        let dk1 = exact_ric_with(a, (k + 1).min(a.cols()), &options)?.delta;
        (d2.min(dk1), dk1)
    } else {
        let dk1 = args
            .delta_k1
            .ok_or_else(|| usage("`linf:EPS` needs --exact-ric or --delta-k1"))?;
        (args.delta2.unwrap_or(dk1), dk1)
    };
    let threshold = linf_stopping_threshold(k, delta2, delta_k1, eps, args.unit_norm)?;
    eprintln!("linf stopping threshold {threshold} (delta2 = {delta2}, delta_K+1 = {delta_k1})");
    Ok(StoppingRule::CorrelationLInf(threshold))
}

fn cmd_omp_run(args: &OmpRunArgs) -> CmdResult {
    let (a, y) = match &args.instance {
        Some(path) => {
            let inst: Instance = serde_json::from_str(&read(path)?).with_context(|| format!("in {}", path.display()))?;
            let y = inst.measurement()?;
            (inst.a, y)
        }
        None => (
            load_matrix(args.matrix.as_deref().expect("clap requires --matrix"))?,
            load_vector(args.measurement.as_deref().expect("clap requires --measurement"))?,
        ),
    };
    let rule = resolve_rule(args, &a)?;
    let options = OmpOptions {
        max_iterations: args.max_iterations,
        tie_break: args.tie_seed.map_or(TieBreak::SmallestIndex, TieBreak::SeededRandom),
    };
    let trace = run_omp_with(&y, &a, rule, &options)?;
    emit(&to_json(&trace)?, args.output.as_deref())?;
    Ok(())
}

fn cmd_ric(args: &RicArgs) -> CmdResult {
    let a = load_matrix(&args.matrix)?;
    let options = RicOptions { budget: args.budget, threads: args.threads };
    let text = if args.all_orders {
        let reports: Vec<RicReport> = exact_ric_all_orders(&a, args.order, &options)?;
        to_json(&reports)?
    } else {
        to_json(&exact_ric_with(&a, args.order, &options)?)?
    };
    emit(&text, args.output.as_deref())?;
    Ok(())
}

#[derive(Serialize)]
struct Certification {
    ric_order: usize,
    delta_exact: f64,
    noise_model: NoiseModel,
    noise_level: f64,
    epsilon: f64,
    noise_within_bound: bool,
    /// A^T y, in column order.
    first_correlations: Vec<f64>,
    /// Column chosen by the first OMP step, 1-based.
    first_selected: usize,
    first_selected_in_support: bool,
}

fn certify(inst: &Instance) -> sharpomp_core::Result<Certification> {
    let k = inst.x.sparsity();
    let order = (k + 1).min(inst.a.cols()).min(inst.a.rows());
    let report = exact_ric_with(&inst.a, order, &RicOptions::default())?;
    let level = inst.noise_level()?;
    let corr = inst.first_correlations()?;
    let mut first = 0;
    for (j, c) in corr.iter().enumerate() {
        if c.abs() > corr[first].abs() {
            first = j;
        }
    }
    Ok(Certification {
        ric_order: order,
        delta_exact: report.delta,
        noise_model: inst.noise_model,
        noise_level: level,
        epsilon: inst.epsilon,
        noise_within_bound: level <= inst.epsilon * (1.0 + 1e-12),
        first_selected_in_support: inst.support().contains(&first),
        first_selected: first + 1,
        first_correlations: corr,
    })
}

fn cmd_construct(args: &ConstructArgs) -> CmdResult {
    let need_k = || args.k.ok_or_else(|| usage("this kind needs --k"));
    let gamma = |upper: f64| args.gamma.unwrap_or(args.gamma_fraction * upper);
    let inst = match args.kind {
        ConstructKind::L2 => {
            let k = need_k()?;
            build_counterexample_l2(k, args.delta, args.epsilon, gamma(gamma_upper_l2(k, args.delta, args.epsilon)))?
        }
        ConstructKind::Linf => {
            let k = need_k()?;
            build_counterexample_linf(k, args.delta, args.epsilon, gamma(gamma_upper_linf(k, args.delta, args.epsilon)))?
        }
        ConstructKind::Example1 => build_example1(args.delta, args.a.unwrap_or(1.5))?,
        ConstructKind::Example2 => build_example2(args.delta, args.a.unwrap_or(0.9))?,
        ConstructKind::Example3 => build_example3(args.delta, args.a.unwrap_or(0.9))?,
    };
    let cert = certify(&inst)?;
    if let Some(p) = &args.matrix_out {
        emit(&write_matrix(&inst.a), Some(p))?;
    }
    if let Some(p) = &args.measurement_out {
        emit(&write_vector(&inst.measurement()?), Some(p))?;
    }
    match &args.output {
        Some(p) => {
            emit(&to_json(&inst)?, Some(p))?;
            emit(&to_json(&serde_json::json!({ "certification": cert }))?, None)?;
        }
        None => emit(&to_json(&serde_json::json!({ "instance": inst, "certification": cert }))?, None)?,
    }
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> CmdResult {
    let config = ExperimentConfig::from_json(&read(&args.config)?)?;
    let out = run_experiment(&config)?;
    let csv_path = args.output.clone().or_else(|| config.output.clone());
    emit(&out.to_csv()?, csv_path.as_deref())?;
    let summary = to_json(&out.summary)?;
    match (&args.summary, &csv_path) {
        (Some(p), _) => emit(&summary, Some(p))?,
        (None, Some(_)) => emit(&summary, None)?,
        (None, None) => eprint!("{summary}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Omp { command: OmpCommand::Run(args) } => cmd_omp_run(args),
        Command::Ric(args) => cmd_ric(args),
        Command::Construct(args) => cmd_construct(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
