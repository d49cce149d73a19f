//! Seeded experiment sweeps over parameter grids.
//!
//! Every trial derives its own generator from `(root seed, cell, trial)`, and
//! results are emitted in `(cell, trial)` order, so the CSV does not depend
//! on how trials were scheduled across threads.

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concurrency::max_threads;
use crate::error::{Error, Result};
use crate::instances::{
    build_counterexample_l2, build_counterexample_linf, build_example1, build_example2, build_example3, gamma_upper_l2,
    gamma_upper_linf, lemma1_gap_given_delta, random_rip_matrix, random_sparse_signal, sample_l2_noise_from,
    sample_linf_noise_from, Instance,
};
use crate::io::format_float;
use crate::linalg::{l2, linf, project_complement, DenseMatrix};
use crate::omp::{
    linf_stopping_threshold, min_magnitude_threshold_l2, min_magnitude_threshold_linf, prior_art_ric_bound,
    prior_art_thresholds, run_omp_with, sharp_ric_bound, OmpOptions, OmpTrace, SparseSignal, StopReason, StoppingRule,
};
use crate::ric::{exact_ric_with, in_sharp_region, RicOptions, RicReport};

pub const TRIALS_SCHEMA: &str = "sharpomp_trials_v1";
pub const COMPARISON_SCHEMA: &str = "sharpomp_comparison_v1";
pub const SUMMARY_SCHEMA: &str = "sharpomp_summary_v1";

/// Slack on the Lemma 1 inequality.
pub const LEMMA1_TOLERANCE: f64 = 1e-10;

/// Slack on the closed-form correlations of Example 1.
pub const EXAMPLE1_TOLERANCE: f64 = 1e-10;

const EXAMPLE1_DELTAS: [f64; 3] = [0.1, 0.5, 0.9];
const EXAMPLE23_DELTAS: [f64; 3] = [0.2, 0.45, 0.65];
const COMPARISON_GRID: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    Theorem1Sweep,
    Theorem2Sweep,
    Theorem3Demo,
    Theorem4Demo,
    Lemma1Suite,
    ComparisonTable,
    Example1,
    Example2,
    Example3,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Theorem1Sweep => "Theorem1Sweep",
            ExperimentKind::Theorem2Sweep => "Theorem2Sweep",
            ExperimentKind::Theorem3Demo => "Theorem3Demo",
            ExperimentKind::Theorem4Demo => "Theorem4Demo",
            ExperimentKind::Lemma1Suite => "Lemma1Suite",
            ExperimentKind::ComparisonTable => "ComparisonTable",
            ExperimentKind::Example1 => "Example1",
            ExperimentKind::Example2 => "Example2",
            ExperimentKind::Example3 => "Example3",
        }
    }

    fn is_example(self) -> bool {
        matches!(self, ExperimentKind::Example1 | ExperimentKind::Example2 | ExperimentKind::Example3)
    }

    fn is_randomized(self) -> bool {
        matches!(self, ExperimentKind::Theorem1Sweep | ExperimentKind::Theorem2Sweep | ExperimentKind::Lemma1Suite)
    }
}

/// Experiment description, usually read from JSON.
///
/// `delta_fractions` place delta at `f / sqrt(K+1)`; for the sufficiency
/// sweeps and the Lemma 1 suite that value is the upper end of the interval
/// the exact RIC is drawn from. `deltas` replaces the fractions with raw
/// values. The 2x2 examples take raw deltas only, and `a_factors` scale the
/// lower bound on `a` (Example 1) or the upper bound (Examples 2 and 3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub delta_fractions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub gamma_fractions: Vec<f64>,
    #[serde(default)]
    pub a_factors: Vec<f64>,
    /// Trials per cell for the randomized experiments; the rest run once.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Factor applied to the minimum-magnitude threshold in the sweeps.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_epsilon() -> Vec<f64> {
    vec![1.0]
}

fn default_trials() -> usize {
    1
}

fn default_margin() -> f64 {
    1.1
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            k: Vec::new(),
            delta_fractions: Vec::new(),
            deltas: None,
            epsilon: default_epsilon(),
            gamma_fractions: Vec::new(),
            a_factors: Vec::new(),
            trials: default_trials(),
            margin: default_margin(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.cells().map(|_| ())
    }

    /// Expands the grid into cells, checking every parameter on the way.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let kind = self.experiment;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.epsilon.is_empty() || self.epsilon.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("epsilon must be a non-empty list of positive values".into());
        }
        if matches!(kind, ExperimentKind::Theorem1Sweep | ExperimentKind::Theorem2Sweep)
            && !(self.margin.is_finite() && self.margin > 1.0)
        {
            return bad(format!("margin must exceed 1, got {}", self.margin));
        }

        if kind.is_example() {
            return self.example_cells();
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return bad("k must be a non-empty list of positive integers".into());
        }
        let fractions: Vec<f64> = if self.delta_fractions.is_empty() && kind == ExperimentKind::ComparisonTable {
            (1..=COMPARISON_GRID).map(|i| i as f64 / (COMPARISON_GRID + 1) as f64).collect()
        } else {
            self.delta_fractions.clone()
        };
        let gammas: Vec<Option<f64>> = match kind {
            ExperimentKind::Theorem3Demo | ExperimentKind::Theorem4Demo => {
                let g = if self.gamma_fractions.is_empty() { vec![0.9] } else { self.gamma_fractions.clone() };
                if g.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
                    return bad("gamma_fractions must lie in (0, 1)".into());
                }
                g.into_iter().map(Some).collect()
            }
            _ => vec![None],
        };

        let mut cells = Vec::new();
        for &k in &self.k {
            let deltas: Vec<(Option<f64>, f64)> = match &self.deltas {
                Some(raw) => {
                    if raw.is_empty() {
                        return bad("deltas must not be empty".into());
                    }
                    for &d in raw {
                        if !(d > 0.0 && in_sharp_region(k, d)) {
                            return bad(format!("delta {d} is outside (0, 1/sqrt({}))", k + 1));
                        }
                    }
                    raw.iter().map(|&d| (None, d)).collect()
                }
                None => {
                    if fractions.is_empty() {
                        return bad("delta_fractions must not be empty".into());
                    }
                    if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
                        return bad("delta_fractions must lie in (0, 1)".into());
                    }
                    fractions.iter().map(|&f| (Some(f), f * sharp_ric_bound(k))).collect()
                }
            };
            for &(fraction, delta) in &deltas {
                for &epsilon in &self.epsilon {
                    for &gamma_fraction in &gammas {
                        cells.push(Cell {
                            index: cells.len(),
                            k,
                            delta_fraction: fraction,
                            delta,
                            epsilon,
                            gamma_fraction,
                            a_factor: None,
                        });
                    }
                }
            }
        }
        Ok(cells)
    }

    fn example_cells(&self) -> Result<Vec<Cell>> {
        let kind = self.experiment;
        if !self.delta_fractions.is_empty() {
            return Err(Error::InvalidArgument("the 2x2 examples take raw `deltas`, not fractions".into()));
        }
        let (default_deltas, delta_hi, default_factor): (&[f64], f64, f64) = match kind {
            ExperimentKind::Example1 => (&EXAMPLE1_DELTAS, 1.0, 1.5),
            _ => (&EXAMPLE23_DELTAS, std::f64::consts::FRAC_1_SQRT_2, 0.9),
        };
        let deltas = self.deltas.clone().unwrap_or_else(|| default_deltas.to_vec());
        if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0 && *d < delta_hi)) {
            return Err(Error::InvalidArgument(format!("deltas must be a non-empty list in (0, {delta_hi})")));
        }
        let factors = if self.a_factors.is_empty() { vec![default_factor] } else { self.a_factors.clone() };
        let factor_ok = |f: f64| if kind == ExperimentKind::Example1 { f > 1.0 && f.is_finite() } else { f > 0.0 && f < 1.0 };
        if factors.iter().any(|f| !factor_ok(*f)) {
            return Err(Error::InvalidArgument(
                "a_factors must exceed 1 for Example1 and lie in (0, 1) otherwise".into(),
            ));
        }
        let mut cells = Vec::new();
        for &delta in &deltas {
            for &a_factor in &factors {
                cells.push(Cell {
                    index: cells.len(),
                    k: 1,
                    delta_fraction: None,
                    delta,
                    epsilon: f64::NAN,
                    gamma_fraction: None,
                    a_factor: Some(a_factor),
                });
            }
        }
        Ok(cells)
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub k: usize,
    pub delta_fraction: Option<f64>,
    pub delta: f64,
    /// NaN for the 2x2 examples, whose noise level is fixed by delta.
    pub epsilon: f64,
    pub gamma_fraction: Option<f64>,
    pub a_factor: Option<f64>,
}

/// Per-trial seed from a root seed by a counter-based split.
pub fn trial_seed(root: u64, cell: usize, trial: usize) -> u64 {
    let cell_stream = splitmix64(root ^ splitmix64(cell as u64));
    splitmix64(cell_stream.wrapping_add(trial as u64))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One row of the trials CSV. Indices are zero-based here and one-based in
/// the CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub delta_fraction: Option<f64>,
    /// The delta parameter of the cell: the construction's delta, or the upper
    /// end of the target interval for randomly drawn matrices.
    pub delta: Option<f64>,
    /// Exact `delta_{K+1}` of the matrix actually used.
    pub delta_exact: Option<f64>,
    pub delta2_exact: Option<f64>,
    pub epsilon: Option<f64>,
    /// `gamma` for the counterexamples, `a` for the 2x2 examples.
    pub gamma: Option<f64>,
    pub rule: Option<String>,
    pub min_magnitude: Option<f64>,
    pub magnitude_threshold: Option<f64>,
    pub noise_level: Option<f64>,
    pub stop_reason: Option<StopReason>,
    pub iterations: Option<usize>,
    pub true_support: Vec<usize>,
    pub found_support: Option<Vec<usize>>,
    pub subset: Option<Vec<usize>>,
    pub support_recovered: Option<bool>,
    pub first_selected: Option<usize>,
    /// `max_{i in Omega} |<y, A_i>| - max_{j notin Omega} |<y, A_j>|`.
    pub correlation_gap: Option<f64>,
    pub lemma_lhs: Option<f64>,
    pub lemma_rhs: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

impl TrialRecord {
    fn start(cell: &Cell, trial: usize, seed: u64) -> Self {
        Self {
            cell: cell.index,
            trial,
            seed,
            k: cell.k,
            delta_fraction: cell.delta_fraction,
            delta: Some(cell.delta),
            epsilon: Some(cell.epsilon).filter(|e| !e.is_nan()),
            ..Default::default()
        }
    }

    fn record_trace(&mut self, trace: &OmpTrace) {
        let found: BTreeSet<usize> = trace.final_support.iter().copied().collect();
        let truth: BTreeSet<usize> = self.true_support.iter().copied().collect();
        self.stop_reason = Some(trace.stop_reason);
        self.iterations = Some(trace.iteration_count());
        self.first_selected = trace.iterations.first().map(|r| r.selected_index);
        self.found_support = Some(found.iter().copied().collect());
        self.support_recovered = Some(found == truth);
    }

    fn record_instance(&mut self, inst: &Instance) -> Result<Vec<f64>> {
        self.rows = Some(inst.a.rows());
        self.cols = Some(inst.a.cols());
        self.true_support = inst.support().to_vec();
        self.min_magnitude = inst.x.min_magnitude();
        self.noise_level = Some(inst.noise_level()?);
        self.epsilon = Some(inst.epsilon);
        let y = inst.measurement()?;
        self.correlation_gap = Some(correlation_gap(&inst.a, &y, inst.support())?);
        Ok(y)
    }

    fn csv_header() -> Vec<&'static str> {
        vec![
            TRIALS_SCHEMA,
            "cell",
            "trial",
            "seed",
            "K",
            "m",
            "n",
            "delta_fraction",
            "delta",
            "delta_exact",
            "delta2_exact",
            "epsilon",
            "gamma",
            "rule",
            "min_magnitude",
            "magnitude_threshold",
            "noise_level",
            "stop_reason",
            "iterations",
            "true_support",
            "found_support",
            "subset",
            "support_recovered",
            "first_selected",
            "correlation_gap",
            "lemma_lhs",
            "lemma_rhs",
            "pass",
            "error",
        ]
    }

    fn csv_fields(&self, experiment: ExperimentKind) -> Vec<String> {
        vec![
            experiment.name().to_string(),
            self.cell.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.k.to_string(),
            opt(self.rows),
            opt(self.cols),
            opt_float(self.delta_fraction),
            opt_float(self.delta),
            opt_float(self.delta_exact),
            opt_float(self.delta2_exact),
            opt_float(self.epsilon),
            opt_float(self.gamma),
            self.rule.clone().unwrap_or_default(),
            opt_float(self.min_magnitude),
            opt_float(self.magnitude_threshold),
            opt_float(self.noise_level),
            self.stop_reason.map(|s| format!("{s:?}")).unwrap_or_default(),
            opt(self.iterations),
            index_list(&self.true_support),
            self.found_support.as_deref().map(index_list).unwrap_or_default(),
            self.subset.as_deref().map(index_list).unwrap_or_default(),
            opt(self.support_recovered),
            opt(self.first_selected.map(|i| i + 1)),
            opt_float(self.correlation_gap),
            opt_float(self.lemma_lhs),
            opt_float(self.lemma_rhs),
            self.pass.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn index_list(ix: &[usize]) -> String {
    ix.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" ")
}

/// One row of the comparison CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub cell: usize,
    pub k: usize,
    pub delta_fraction: Option<f64>,
    pub delta: f64,
    pub epsilon: f64,
    pub sharp_ric_bound_value: f64,
    pub prior_ric_bound: f64,
    pub sharp_min_magnitude: f64,
    /// `None` where the earlier bound's denominator is not positive, i.e. the
    /// earlier result gives no guarantee at this delta.
    pub prior_min_magnitude: Option<f64>,
    pub ric_ok: bool,
    pub min_magnitude_ok: bool,
}

impl ComparisonRow {
    pub fn pass(&self) -> bool {
        self.ric_ok && self.min_magnitude_ok
    }

    fn csv_header() -> Vec<&'static str> {
        vec![
            COMPARISON_SCHEMA,
            "cell",
            "K",
            "delta_fraction",
            "delta",
            "epsilon",
            "sharp_ric_bound",
            "prior_ric_bound",
            "sharp_min_magnitude",
            "prior_min_magnitude",
            "ric_ok",
            "min_magnitude_ok",
            "pass",
        ]
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            ExperimentKind::ComparisonTable.name().to_string(),
            self.cell.to_string(),
            self.k.to_string(),
            opt_float(self.delta_fraction),
            format_float(self.delta),
            format_float(self.epsilon),
            format_float(self.sharp_ric_bound_value),
            format_float(self.prior_ric_bound),
            format_float(self.sharp_min_magnitude),
            self.prior_min_magnitude.map(format_float).unwrap_or_else(|| "inf".into()),
            self.ric_ok.to_string(),
            self.min_magnitude_ok.to_string(),
            self.pass().to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta_fraction: Option<f64>,
    pub delta: f64,
    pub epsilon: Option<f64>,
    pub gamma_fraction: Option<f64>,
    pub a_factor: Option<f64>,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub cells: Vec<CellSummary>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    pub trials: Vec<TrialRecord>,
    pub comparison: Vec<ComparisonRow>,
    pub summary: Summary,
}

impl ExperimentOutput {
    /// RFC 4180 CSV with LF line endings. The first header field is the
    /// schema token.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let map = |e: csv::Error| Error::Io(e.to_string());
        if self.experiment == ExperimentKind::ComparisonTable {
            w.write_record(ComparisonRow::csv_header()).map_err(map)?;
            for row in &self.comparison {
                w.write_record(row.csv_fields()).map_err(map)?;
            }
        } else {
            w.write_record(TrialRecord::csv_header()).map_err(map)?;
            for rec in &self.trials {
                w.write_record(rec.csv_fields(self.experiment)).map_err(map)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Runs an experiment with the worker count from [`max_threads`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with_threads(config, max_threads())
}

pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let cells = config.cells()?;
    let kind = config.experiment;
    if kind == ExperimentKind::ComparisonTable {
        let rows: Vec<ComparisonRow> = cells.iter().map(comparison_row).collect();
        let outcomes: Vec<(usize, bool, bool)> = rows.iter().map(|r| (r.cell, r.pass(), false)).collect();
        let summary = summarize(config, &cells, &outcomes);
        return Ok(ExperimentOutput { experiment: kind, trials: Vec::new(), comparison: rows, summary });
    }

    let per_cell = if kind.is_randomized() { config.trials } else { 1 };
    let jobs: Vec<(Cell, usize)> =
        cells.iter().flat_map(|c| (0..per_cell).map(move |t| (*c, t))).collect();
    let groups = parallel_map(&jobs, threads, |(cell, trial)| {
        let seed = trial_seed(config.seed, cell.index, *trial);
        run_trial(kind, cell, *trial, seed, config.margin)
    });
    let trials: Vec<TrialRecord> = groups.into_iter().flatten().collect();
    let outcomes: Vec<(usize, bool, bool)> = trials.iter().map(|r| (r.cell, r.pass, r.error.is_some())).collect();
    let summary = summarize(config, &cells, &outcomes);
    Ok(ExperimentOutput { experiment: kind, trials, comparison: Vec::new(), summary })
}

fn summarize(config: &ExperimentConfig, cells: &[Cell], outcomes: &[(usize, bool, bool)]) -> Summary {
    let mut summaries: Vec<CellSummary> = cells
        .iter()
        .map(|c| CellSummary {
            cell: c.index,
            k: c.k,
            delta_fraction: c.delta_fraction,
            delta: c.delta,
            epsilon: Some(c.epsilon).filter(|e| !e.is_nan()),
            gamma_fraction: c.gamma_fraction,
            a_factor: c.a_factor,
            trials: 0,
            passed: 0,
            failed: 0,
            errors: 0,
        })
        .collect();
    for &(cell, pass, error) in outcomes {
        let s = &mut summaries[cell];
        s.trials += 1;
        if pass {
            s.passed += 1;
        } else {
            s.failed += 1;
        }
        if error {
            s.errors += 1;
        }
    }
    Summary {
        schema: SUMMARY_SCHEMA.into(),
        experiment: config.experiment,
        seed: config.seed,
        trials: summaries.iter().map(|s| s.trials).sum(),
        passed: summaries.iter().map(|s| s.passed).sum(),
        failed: summaries.iter().map(|s| s.failed).sum(),
        errors: summaries.iter().map(|s| s.errors).sum(),
        cells: summaries,
    }
}

/// Maps `f` over `items` on up to `threads` workers, keeping input order.
fn parallel_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Vec<U> + Sync) -> Vec<Vec<U>> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("trial worker panicked")).collect()
    })
}

fn single_thread() -> RicOptions {
    RicOptions { threads: Some(1), ..RicOptions::default() }
}

fn run_trial(kind: ExperimentKind, cell: &Cell, trial: usize, seed: u64, margin: f64) -> Vec<TrialRecord> {
    let mut rec = TrialRecord::start(cell, trial, seed);
    let outcome = match kind {
        ExperimentKind::Theorem1Sweep => sufficiency_trial(&mut rec, cell, seed, margin, false),
        ExperimentKind::Theorem2Sweep => sufficiency_trial(&mut rec, cell, seed, margin, true),
        ExperimentKind::Theorem3Demo => counterexample_trial(&mut rec, cell, false),
        ExperimentKind::Theorem4Demo => counterexample_trial(&mut rec, cell, true),
        ExperimentKind::Lemma1Suite => lemma1_trial(&mut rec, cell, seed),
        ExperimentKind::Example1 => return example1_trials(rec, cell),
        ExperimentKind::Example2 | ExperimentKind::Example3 => {
            example23_trial(&mut rec, cell, kind == ExperimentKind::Example3)
        }
        ExperimentKind::ComparisonTable => unreachable!("handled without trials"),
    };
    if let Err(e) = outcome {
        rec.pass = false;
        rec.error = Some(e.to_string());
    }
    vec![rec]
}

/// Shape for a random matrix with `K`-sparse signals and exact `delta_{K+1}`.
///
/// Wide shapes are only drawn where a random tight frame reliably gets below
/// the sharp bound; the last attempt falls back to a square matrix.
fn draw_rip_matrix<R: Rng + ?Sized>(k: usize, upper: f64, rng: &mut R) -> Result<(DenseMatrix, RicReport)> {
    let order = k + 1;
    let mut last = None;
    for attempt in 0..3 {
        let n = rng.random_range(k + 2..=12.max(k + 2));
        let lowest = if attempt == 2 {
            n
        } else if k == 1 && n >= 6 {
            n - 2
        } else if n >= 2 * k + 3 {
            n - 1
        } else {
            n
        };
        let m = rng.random_range(lowest.max(order)..=20.max(n));
        match random_rip_matrix(m, n, order, 0.0, upper, rng) {
            Ok(found) => return Ok(found),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn correlation_gap(a: &DenseMatrix, y: &[f64], support: &[usize]) -> Result<f64> {
    let c = a.tr_mul_vec(y)?;
    let (mut on, mut off) = (0.0f64, 0.0f64);
    for (i, v) in c.iter().enumerate() {
        if support.contains(&i) {
            on = on.max(v.abs());
        } else {
            off = off.max(v.abs());
        }
    }
    Ok(on - off)
}

fn sufficiency_trial(rec: &mut TrialRecord, cell: &Cell, seed: u64, margin: f64, linf_noise: bool) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, eps) = (cell.k, cell.epsilon);
    let (a, report) = draw_rip_matrix(k, cell.delta, &mut rng)?;
    let delta = report.delta;
    rec.rows = Some(a.rows());
    rec.cols = Some(a.cols());
    rec.delta_exact = Some(delta);

    let (x, v, rule, noise_level): (SparseSignal, Vec<f64>, StoppingRule, f64) = if linf_noise {
        // delta_2 <= delta_{K+1} holds exactly; clamp away rounding
        let delta2 = if k == 1 { delta } else { exact_ric_with(&a, 2, &single_thread())?.delta.min(delta) };
        rec.delta2_exact = Some(delta2);
        let stop = linf_stopping_threshold(k, delta2, delta, eps, false)?;
        let threshold = min_magnitude_threshold_linf(k, delta2, delta, eps, false)?;
        rec.magnitude_threshold = Some(threshold);
        let x = random_sparse_signal(a.cols(), k, margin * threshold, &mut rng)?;
        let v = sample_linf_noise_from(&a, eps, &mut rng)?.into_inner();
        let level = linf(&a.tr_mul_vec(&v)?);
        (x, v, StoppingRule::CorrelationLInf(stop), level)
    } else {
        let threshold = min_magnitude_threshold_l2(k, delta, eps)?;
        rec.magnitude_threshold = Some(threshold);
        let x = random_sparse_signal(a.cols(), k, margin * threshold, &mut rng)?;
        let v = sample_l2_noise_from(a.rows(), eps, &mut rng)?.into_inner();
        let level = l2(&v);
        (x, v, StoppingRule::ResidualL2(eps), level)
    };
    rec.rule = Some(rule.to_string());
    rec.noise_level = Some(noise_level);
    rec.true_support = x.support().to_vec();
    rec.min_magnitude = x.min_magnitude();

    let mut y = a.mul_vec(x.values())?.into_inner();
    y.iter_mut().zip(&v).for_each(|(yi, vi)| *yi += vi);
    rec.correlation_gap = Some(correlation_gap(&a, &y, x.support())?);
    let trace = run_omp_with(&y, &a, rule, &OmpOptions::default())?;
    rec.record_trace(&trace);
    rec.pass = rec.support_recovered == Some(true) && rec.iterations == Some(x.sparsity());
    Ok(())
}

fn counterexample_trial(rec: &mut TrialRecord, cell: &Cell, linf_noise: bool) -> Result<()> {
    let (k, delta, eps) = (cell.k, cell.delta, cell.epsilon);
    let fraction = cell.gamma_fraction.expect("demo cells carry a gamma fraction");
    let inst = if linf_noise {
        build_counterexample_linf(k, delta, eps, fraction * gamma_upper_linf(k, delta, eps))?
    } else {
        build_counterexample_l2(k, delta, eps, fraction * gamma_upper_l2(k, delta, eps))?
    };
    rec.gamma = inst.metadata.gamma;
    rec.delta_exact = Some(exact_ric_with(&inst.a, k + 1, &single_thread())?.delta);
    let y = rec.record_instance(&inst)?;
    let rule = StoppingRule::FixedIterations(k);
    rec.rule = Some(rule.to_string());
    let trace = run_omp_with(&y, &inst.a, rule, &OmpOptions::default())?;
    rec.record_trace(&trace);
    rec.pass = rec.support_recovered == Some(false) && rec.first_selected == Some(k);
    Ok(())
}

fn lemma1_trial(rec: &mut TrialRecord, cell: &Cell, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cell.k;
    let (a, report) = draw_rip_matrix(k, cell.delta, &mut rng)?;
    rec.rows = Some(a.rows());
    rec.cols = Some(a.cols());
    rec.delta_exact = Some(report.delta);
    rec.epsilon = None;
    let x = random_sparse_signal(a.cols(), k, 1.0, &mut rng)?;
    let size = rng.random_range(0..k);
    let mut subset: Vec<usize> =
        rand::seq::index::sample(&mut rng, k, size).into_iter().map(|j| x.support()[j]).collect();
    subset.sort_unstable();
    rec.true_support = x.support().to_vec();
    rec.min_magnitude = x.min_magnitude();
    let gap = lemma1_gap_given_delta(&a, &x, &subset, report.delta)?;
    rec.subset = Some(subset);
    rec.lemma_lhs = Some(gap.lhs_gap);
    rec.lemma_rhs = Some(gap.rhs_bound);
    rec.pass = gap.lhs_gap - gap.rhs_bound >= -LEMMA1_TOLERANCE;
    Ok(())
}

fn example1_trials(template: TrialRecord, cell: &Cell) -> Vec<TrialRecord> {
    let delta = cell.delta;
    let a_val = cell.a_factor.expect("example cells carry a factor") * (1.0 + delta) / (1.0 - delta);
    let rules = [
        StoppingRule::NaiveLInf(1.0),
        linf_stopping_threshold(1, delta, delta, 1.0, false).map(StoppingRule::CorrelationLInf).unwrap_or(StoppingRule::NaiveLInf(1.0)),
    ];
    rules
        .iter()
        .enumerate()
        .map(|(t, rule)| {
            let mut rec = TrialRecord { trial: t, ..template.clone() };
            let outcome = (|| -> Result<()> {
                let inst = build_example1(delta, a_val)?;
                rec.gamma = Some(a_val);
                rec.delta_exact = Some(exact_ric_with(&inst.a, 2, &single_thread())?.delta);
                let y = rec.record_instance(&inst)?;
                rec.rule = Some(rule.to_string());
                let trace = run_omp_with(&y, &inst.a, *rule, &OmpOptions::default())?;
                rec.record_trace(&trace);
                if t == 0 {
                    let r1 = project_complement(&inst.a.columns_submatrix(&[0])?, &y)?;
                    let c = inst.a.tr_mul_vec(&r1)?;
                    let closed_form = c[0].abs() <= EXAMPLE1_TOLERANCE
                        && (c[1] - (1.0 + delta * delta)).abs() <= EXAMPLE1_TOLERANCE;
                    rec.pass = closed_form && rec.iterations == Some(2) && rec.found_support.as_deref() == Some(&[0, 1]);
                } else {
                    rec.magnitude_threshold = rule_threshold(rule);
                    rec.pass = rec.iterations == Some(1) && rec.found_support.as_deref() == Some(&[0]);
                }
                Ok(())
            })();
            if let Err(e) = outcome {
                rec.pass = false;
                rec.error = Some(e.to_string());
            }
            rec
        })
        .collect()
}

fn rule_threshold(rule: &StoppingRule) -> Option<f64> {
    match *rule {
        StoppingRule::CorrelationLInf(t) => Some(t),
        _ => None,
    }
}

/// Examples 2 and 3: one-iteration recovery although `a` violates the
/// worst-case necessary magnitude bound evaluated at the stated delta.
fn example23_trial(rec: &mut TrialRecord, cell: &Cell, linf_noise: bool) -> Result<()> {
    let delta = cell.delta;
    let root = 2f64.sqrt();
    let factor = cell.a_factor.expect("example cells carry a factor");
    let (inst, rule, necessary) = if linf_noise {
        let upper = 2.0 * root * delta / (1.0 - root * delta);
        let inst = build_example3(delta, factor * upper)?;
        let stop = linf_stopping_threshold(1, delta, delta, inst.epsilon, false)?;
        let necessary = 2.0 * inst.epsilon / (1.0 - root * delta);
        (inst, StoppingRule::CorrelationLInf(stop), necessary)
    } else {
        let upper = (2.0 * (1.0 - delta)).sqrt() / (1.0 - root * delta);
        let inst = build_example2(delta, factor * upper)?;
        let necessary = (1.0 - delta).sqrt() * inst.epsilon / (1.0 - root * delta);
        let eps = inst.epsilon;
        (inst, StoppingRule::ResidualL2(eps), necessary)
    };
    rec.gamma = inst.metadata.a;
    rec.delta_exact = Some(exact_ric_with(&inst.a, 2, &single_thread())?.delta);
    rec.magnitude_threshold = Some(necessary);
    let y = rec.record_instance(&inst)?;
    rec.rule = Some(rule.to_string());
    let trace = run_omp_with(&y, &inst.a, rule, &OmpOptions::default())?;
    rec.record_trace(&trace);
    let violates = inst.x.min_magnitude().is_some_and(|m| m < necessary);
    rec.pass = violates && rec.iterations == Some(1) && rec.support_recovered == Some(true);
    Ok(())
}

fn comparison_row(cell: &Cell) -> ComparisonRow {
    let (k, delta, eps) = (cell.k, cell.delta, cell.epsilon);
    let sharp_ric_bound_value = sharp_ric_bound(k);
    let prior_ric_bound = prior_art_ric_bound(k);
    let sharp_min_magnitude = min_magnitude_threshold_l2(k, delta, eps).unwrap_or(f64::INFINITY);
    let prior_min_magnitude = prior_art_thresholds(k, delta, eps).ok().map(|p| p.min_magnitude);
    ComparisonRow {
        cell: cell.index,
        k,
        delta_fraction: cell.delta_fraction,
        delta,
        epsilon: eps,
        sharp_ric_bound_value,
        prior_ric_bound,
        sharp_min_magnitude,
        prior_min_magnitude,
        ric_ok: prior_ric_bound < sharp_ric_bound_value,
        min_magnitude_ok: prior_min_magnitude.is_none_or(|p| p >= sharp_min_magnitude),
    }
}
