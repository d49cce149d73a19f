//! Orthogonal Matching Pursuit under sharp restricted-isometry conditions.
//!
//! Dense linear algebra, exact restricted isometry constants, OMP with several
//! stopping rules, counterexample instances and a reproducible experiment
//! runner.

pub mod concurrency;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod omp;
pub mod ric;

pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutput, Summary, TrialRecord};
pub use instances::{
    build_counterexample_l2, build_counterexample_linf, build_example1, build_example2, build_example3, lemma1_gap,
    orthonormal_complement_of_ones, sample_l2_noise, sample_linf_noise, Instance, Lemma1Gap, NoiseModel,
};
pub use linalg::{least_squares, norms, project_complement, sym_eigen, sym_eigen_extremes, DenseMatrix, Norms, SymEigen, Vector};
pub use omp::{
    linf_stopping_threshold, min_magnitude_threshold_l2, min_magnitude_threshold_linf, prior_art_thresholds, run_omp,
    run_omp_with, OmpOptions, OmpTrace, SparseSignal, StopReason, StoppingRule, TieBreak,
};
pub use ric::{check_rip_inequality, exact_ric, exact_ric_all_orders, exact_ric_with, in_sharp_region, RicOptions, RicReport};
