//! Orthogonal Matching Pursuit with pluggable stopping rules.

mod thresholds;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, linf, l2, DenseMatrix};

pub use thresholds::{
    linf_stopping_threshold, min_magnitude_threshold_l2, min_magnitude_threshold_linf, prior_art_ric_bound,
    prior_art_thresholds, sharp_ric_bound, PriorArtThresholds,
};

/// Relative gap under which two correlation magnitudes count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A length-n signal together with its support `{i : x_i != 0}`.
///
/// The support uses exact comparison with zero, no tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SparseSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SparseSignal::new"));
        }
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(Self { values, support })
    }

    /// Like [`SparseSignal::new`] but rejects signals with more than `k` nonzeros.
    pub fn with_sparsity(values: Vec<f64>, k: usize) -> Result<Self> {
        let s = Self::new(values)?;
        if s.support.len() > k {
            return Err(Error::ParameterOutOfRange(format!(
                "signal has {} nonzeros, declared sparsity is {k}",
                s.support.len()
            )));
        }
        Ok(s)
    }

    /// Zero signal of length `n` with `values[j]` placed at `support[j]`.
    pub fn from_support(n: usize, support: &[usize], values: &[f64]) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch {
                operation: "SparseSignal::from_support",
                expected: support.len(),
                found: values.len(),
            });
        }
        crate::linalg::check_index_set(support, n)?;
        let mut full = vec![0.0; n];
        for (&i, &v) in support.iter().zip(values) {
            full[i] = v;
        }
        Self::new(full)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nonzero positions, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// `min_{i in support} |x_i|`, `None` for the zero signal.
    pub fn min_magnitude(&self) -> Option<f64> {
        self.support.iter().map(|&i| self.values[i].abs()).reduce(f64::min)
    }
}

impl From<SparseSignal> for Vec<f64> {
    fn from(s: SparseSignal) -> Self {
        s.values
    }
}

impl TryFrom<Vec<f64>> for SparseSignal {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Run exactly this many iterations.
    FixedIterations(usize),
    /// Stop once `||r||_2 <= eps`.
    ResidualL2(f64),
    /// Stop once `||A^T r||_inf` is at most the given threshold.
    CorrelationLInf(f64),
    /// Stop once `||A^T r||_inf <= eps`, the bare noise level.
    NaiveLInf(f64),
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StoppingRule::FixedIterations(k) => k >= 1,
            StoppingRule::ResidualL2(t) | StoppingRule::CorrelationLInf(t) | StoppingRule::NaiveLInf(t) => {
                t.is_finite() && t > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("stopping rule parameter must be positive: {self}")))
        }
    }

    fn is_met(&self, residual_l2: f64, correlation_linf: f64) -> bool {
        match *self {
            StoppingRule::FixedIterations(_) => false,
            StoppingRule::ResidualL2(eps) => residual_l2 <= eps,
            StoppingRule::CorrelationLInf(t) | StoppingRule::NaiveLInf(t) => correlation_linf <= t,
        }
    }
}

impl fmt::Display for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingRule::FixedIterations(k) => write!(f, "fixed:{k}"),
            StoppingRule::ResidualL2(e) => write!(f, "l2:{e}"),
            StoppingRule::CorrelationLInf(t) => write!(f, "corr-linf:{t}"),
            StoppingRule::NaiveLInf(e) => write!(f, "naive-linf:{e}"),
        }
    }
}

impl FromStr for StoppingRule {
    type Err = Error;

    /// Parses `fixed:K`, `l2:EPS`, `corr-linf:THRESHOLD` or `naive-linf:EPS`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("rule spec `{s}` has no `:`")))?;
        let num = |a: &str| {
            a.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("rule spec `{s}`: {e}")))
        };
        let rule = match kind.trim() {
            "fixed" => StoppingRule::FixedIterations(
                arg.trim()
                    .parse()
                    .map_err(|e| Error::InvalidArgument(format!("rule spec `{s}`: {e}")))?,
            ),
            "l2" => StoppingRule::ResidualL2(num(arg)?),
            "corr-linf" => StoppingRule::CorrelationLInf(num(arg)?),
            "naive-linf" => StoppingRule::NaiveLInf(num(arg)?),
            other => return Err(Error::InvalidArgument(format!("unknown stopping rule `{other}`"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// How to choose among columns whose correlations tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    SmallestIndex,
    /// Uniform choice among the tied columns, driven only by this seed.
    SeededRandom(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OmpOptions {
    /// Defaults to `min(rows, cols)`.
    pub max_iterations: Option<usize>,
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    RuleMet,
    MaxIterations,
    RankDeficient,
}

/// One pass of the selection / re-fit loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Zero-based column chosen in this iteration.
    pub selected_index: usize,
    /// `A^T r` for the residual entering the iteration: the selection metric.
    pub correlations: Vec<f64>,
    /// `||r||_2` of the residual after the re-fit.
    pub residual_l2: f64,
    /// `||A^T r||_inf` of the residual after the re-fit.
    pub correlation_linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpTrace {
    pub initial_residual_l2: f64,
    pub initial_correlation_linf: f64,
    pub iterations: Vec<IterationRecord>,
    /// Selected columns, ascending, zero-based.
    pub final_support: Vec<usize>,
    /// Restricted least-squares fit on `final_support`, zero elsewhere.
    pub final_estimate: SparseSignal,
    pub stop_reason: StopReason,
}

impl OmpTrace {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    /// Columns in the order they were picked.
    pub fn selection_order(&self) -> Vec<usize> {
        self.iterations.iter().map(|r| r.selected_index).collect()
    }
}

/// Runs OMP with default options and an explicit iteration cap.
pub fn run_omp(y: &[f64], a: &DenseMatrix, rule: StoppingRule, max_iterations: usize) -> Result<OmpTrace> {
    run_omp_with(
        y,
        a,
        rule,
        &OmpOptions { max_iterations: Some(max_iterations), ..Default::default() },
    )
}

/// Orthogonal Matching Pursuit.
///
/// Each iteration picks the column most correlated with the current residual,
/// adds it to the support, refits `y` on the support by least squares and
/// replaces the residual. Residual-based rules are tested after every refit;
/// a measurement vector that is exactly zero meets every such rule before
/// anything is selected. `FixedIterations(K)` ignores the residual and stops
/// after K iterations. Columns already in the support are orthogonal to the
/// residual and are not candidates.
///
/// If a new column makes the support rank deficient the run stops with
/// [`StopReason::RankDeficient`] and keeps the last full-rank fit.
pub fn run_omp_with(y: &[f64], a: &DenseMatrix, rule: StoppingRule, options: &OmpOptions) -> Result<OmpTrace> {
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch { operation: "run_omp", expected: m, found: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("run_omp"));
    }
    rule.validate()?;
    let cap = m.min(n);
    let max_iterations = options.max_iterations.unwrap_or(cap);
    if max_iterations == 0 || max_iterations > cap {
        return Err(Error::InvalidArgument(format!(
            "max_iterations must lie in 1..={cap}, got {max_iterations}"
        )));
    }
    let mut rng = match options.tie_break {
        TieBreak::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        TieBreak::SmallestIndex => None,
    };

    let mut residual = y.to_vec();
    let mut correlations = a.tr_mul_vec(&residual)?.into_inner();
    let initial_residual_l2 = l2(&residual);
    let initial_correlation_linf = linf(&correlations);

    let mut support: Vec<usize> = Vec::new();
    let mut selected = vec![false; n];
    let mut coefficients: Vec<f64> = Vec::new();
    let mut iterations = Vec::new();

    let residual_rule = !matches!(rule, StoppingRule::FixedIterations(_));
    let stop_reason = if residual_rule && residual.iter().all(|&v| v == 0.0) {
        StopReason::RuleMet
    } else {
        loop {
            if let StoppingRule::FixedIterations(k) = rule {
                if iterations.len() == k {
                    break StopReason::RuleMet;
                }
            }
            if iterations.len() == max_iterations {
                break StopReason::MaxIterations;
            }

            let pick = select_column(&correlations, &selected, rng.as_mut());
            support.push(pick);
            let sub = a.columns_submatrix(&support)?;
            let fit = match least_squares(&sub, y) {
                Ok(fit) => fit,
                Err(Error::RankDeficient { .. }) => {
                    support.pop();
                    break StopReason::RankDeficient;
                }
                Err(e) => return Err(e),
            };
            selected[pick] = true;
            let fitted = sub.mul_vec(&fit)?;
            for ((r, yi), fi) in residual.iter_mut().zip(y).zip(fitted.iter()) {
                *r = yi - fi;
            }
            coefficients = fit.into_inner();
            let next = a.tr_mul_vec(&residual)?.into_inner();
            let record = IterationRecord {
                selected_index: pick,
                correlations: std::mem::replace(&mut correlations, next),
                residual_l2: l2(&residual),
                correlation_linf: linf(&correlations),
            };
            let met = rule.is_met(record.residual_l2, record.correlation_linf);
            iterations.push(record);
            if met {
                break StopReason::RuleMet;
            }
        }
    };

    let mut estimate = vec![0.0; n];
    for (&i, &c) in support.iter().zip(&coefficients) {
        estimate[i] = c;
    }
    let mut final_support = support;
    final_support.sort_unstable();
    Ok(OmpTrace {
        initial_residual_l2,
        initial_correlation_linf,
        iterations,
        final_support,
        final_estimate: SparseSignal::new(estimate)?,
        stop_reason,
    })
}

fn select_column(correlations: &[f64], selected: &[bool], rng: Option<&mut ChaCha8Rng>) -> usize {
    let best = correlations
        .iter()
        .zip(selected)
        .filter(|(_, s)| !**s)
        .map(|(c, _)| c.abs())
        .fold(0.0, f64::max);
    let floor = best - TIE_TOLERANCE * best;
    let mut tied = correlations
        .iter()
        .enumerate()
        .filter(|(j, c)| !selected[*j] && c.abs() >= floor)
        .map(|(j, _)| j);
    match rng {
        None => tied.next().expect("an unselected column exists"),
        Some(rng) => {
            let tied: Vec<usize> = tied.collect();
            tied[rng.random_range(0..tied.len())]
        }
    }
}

#[derive(Serialize, Deserialize)]
struct IterationWire {
    iteration: usize,
    selected_index: usize,
    correlations: Vec<f64>,
    residual_l2: f64,
    correlation_linf: f64,
}

#[derive(Serialize, Deserialize)]
struct TraceWire {
    stop_reason: StopReason,
    iteration_count: usize,
    initial_residual_l2: f64,
    initial_correlation_linf: f64,
    iterations: Vec<IterationWire>,
    final_support: Vec<usize>,
    final_estimate: Vec<f64>,
}

// Serialized indices are 1-based.
impl Serialize for OmpTrace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TraceWire {
            stop_reason: self.stop_reason,
            iteration_count: self.iterations.len(),
            initial_residual_l2: self.initial_residual_l2,
            initial_correlation_linf: self.initial_correlation_linf,
            iterations: self
                .iterations
                .iter()
                .enumerate()
                .map(|(k, r)| IterationWire {
                    iteration: k + 1,
                    selected_index: r.selected_index + 1,
                    correlations: r.correlations.clone(),
                    residual_l2: r.residual_l2,
                    correlation_linf: r.correlation_linf,
                })
                .collect(),
            final_support: self.final_support.iter().map(|i| i + 1).collect(),
            final_estimate: self.final_estimate.values().to_vec(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OmpTrace {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = TraceWire::deserialize(deserializer)?;
        let zero_based = |i: usize| i.checked_sub(1).ok_or_else(|| D::Error::custom("indices are 1-based"));
        let iterations = w
            .iterations
            .into_iter()
            .map(|r| {
                Ok(IterationRecord {
                    selected_index: zero_based(r.selected_index)?,
                    correlations: r.correlations,
                    residual_l2: r.residual_l2,
                    correlation_linf: r.correlation_linf,
                })
            })
            .collect::<std::result::Result<_, D::Error>>()?;
        Ok(OmpTrace {
            initial_residual_l2: w.initial_residual_l2,
            initial_correlation_linf: w.initial_correlation_linf,
            iterations,
            final_support: w.final_support.into_iter().map(zero_based).collect::<std::result::Result<_, _>>()?,
            final_estimate: SparseSignal::new(w.final_estimate).map_err(D::Error::custom)?,
            stop_reason: w.stop_reason,
        })
    }
}
