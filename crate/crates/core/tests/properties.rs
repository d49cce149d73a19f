use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sharpomp_core::instances::{
    beta, build_counterexample_l2, build_counterexample_linf, closed_form_correlations, counterexample_orthogonal,
    gamma_upper_l2, gamma_upper_linf, lemma1_gap, random_rip_matrix, random_sparse_signal, sample_l2_noise,
    sample_linf_noise, NoiseModel,
};
use sharpomp_core::ric::{spectrum_extremes, witness_vector};
use sharpomp_core::{
    check_rip_inequality, exact_ric, RicOptions, least_squares, norms, project_complement, run_omp_with, sym_eigen_extremes, DenseMatrix, OmpOptions,
    StopReason, StoppingRule,
};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn nrm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn tall_problem() -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
    (3usize..9, 1usize..4).prop_flat_map(|(m, k)| {
        let k = k.min(m - 1);
        (matrix(m, k), prop::collection::vec(-2.0f64..2.0, m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn complement_projection_is_idempotent((a, u) in tall_problem()) {
        let p = project_complement(&a, &u).unwrap();
        let pp = project_complement(&a, &p).unwrap();
        let diff: Vec<f64> = p.iter().zip(pp.iter()).map(|(x, y)| x - y).collect();
        prop_assert!(nrm(&diff) <= 1e-10 * nrm(&u).max(1.0));
        for j in 0..a.cols() {
            let col = project_complement(&a, a.column(j)).unwrap();
            prop_assert!(nrm(&col) <= 1e-10 * nrm(a.column(j)).max(1.0));
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal((a, y) in tall_problem()) {
        let x = least_squares(&a, &y).unwrap();
        let fit = a.mul_vec(&x).unwrap();
        let r: Vec<f64> = y.iter().zip(fit.iter()).map(|(p, q)| p - q).collect();
        for j in 0..a.cols() {
            prop_assert!(dot(a.column(j), &r).abs() <= 1e-10 * nrm(&y).max(1.0));
        }
    }

    #[test]
    fn norms_satisfy_cauchy_schwarz(u in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let n = norms(&u);
        prop_assert!(n.l1 <= (u.len() as f64).sqrt() * n.l2 + 1e-12);
        prop_assert!(n.linf <= n.l2 + 1e-12);
        prop_assert!(n.l2 <= n.l1 + 1e-12);
    }

    #[test]
    fn rayleigh_quotients_lie_between_extremes(a in matrix(5, 4), z in prop::collection::vec(-1.0f64..1.0, 4)) {
        prop_assume!(nrm(&z) > 1e-3);
        let g = a.gram();
        let (lo, hi) = sym_eigen_extremes(&g).unwrap();
        let gz = g.mul_vec(&z).unwrap();
        let q = dot(&z, &gz) / dot(&z, &z);
        prop_assert!(lo - 1e-9 <= q && q <= hi + 1e-9);
    }

    #[test]
    fn ric_follows_scaled_spectrum(a in matrix(6, 5), c in 0.5f64..1.5) {
        let ext = spectrum_extremes(&a, 2, &RicOptions::default()).unwrap();
        let scaled = exact_ric(&a.scaled(c), 2).unwrap();
        prop_assert!((scaled.delta - ext.delta_at_scale(c)).abs() <= 1e-10);
        let w = witness_vector(&a.scaled(c), &scaled).unwrap();
        prop_assert!(check_rip_inequality(&a.scaled(c), &w, scaled.delta + 1e-9).unwrap());
    }

    #[test]
    fn omp_trace_invariants(a in matrix(6, 9), y in prop::collection::vec(-2.0f64..2.0, 6)) {
        let trace = run_omp_with(&y, &a, StoppingRule::ResidualL2(1e-8), &OmpOptions::default()).unwrap();
        let mut selected = Vec::new();
        let mut previous = trace.initial_residual_l2;
        for rec in &trace.iterations {
            let best = rec.correlations.iter().enumerate()
                .filter(|(j, _)| !selected.contains(j))
                .map(|(_, c)| c.abs())
                .fold(0.0, f64::max);
            prop_assert!(rec.correlations[rec.selected_index].abs() >= best - 1e-12);
            prop_assert!(!selected.contains(&rec.selected_index));
            selected.push(rec.selected_index);
            let sub = a.columns_submatrix(&selected).unwrap();
            let r = project_complement(&sub, &y).unwrap();
            prop_assert!((nrm(&r) - rec.residual_l2).abs() <= 1e-10);
            prop_assert!(rec.residual_l2 <= previous + 1e-12);
            previous = rec.residual_l2;
            for &j in &selected {
                prop_assert!(dot(a.column(j), &r).abs() <= 1e-10);
            }
        }
        prop_assert!(trace.stop_reason != StopReason::RuleMet || trace.iterations.last().is_none_or(|r| r.residual_l2 <= 1e-8));
    }

    #[test]
    fn l2_counterexample_correlations_match_closed_form(k in 1usize..12, f in 0.05f64..0.95, g in 0.05f64..0.95, eps in 0.1f64..3.0) {
        let d = f / ((k + 1) as f64).sqrt();
        let gamma = g * gamma_upper_l2(k, d, eps);
        let inst = build_counterexample_l2(k, d, eps, gamma).unwrap();
        let c = inst.first_correlations().unwrap();
        let cf = closed_form_correlations(NoiseModel::L2Bounded, k, d, eps, gamma);
        for ci in &c[..k] {
            prop_assert!((ci - cf.on_support).abs() <= 1e-10);
        }
        prop_assert!((c[k] - cf.off_support).abs() <= 1e-10);
        prop_assert!(cf.off_support.abs() > cf.on_support.abs());
        prop_assert!(nrm(&inst.v) <= eps + 1e-12);
    }

    #[test]
    fn linf_counterexample_correlations_match_closed_form(k in 1usize..12, f in 0.05f64..0.95, g in 0.05f64..0.95, eps in 0.1f64..3.0) {
        let d = f / ((k + 1) as f64).sqrt();
        let gamma = g * gamma_upper_linf(k, d, eps);
        let inst = build_counterexample_linf(k, d, eps, gamma).unwrap();
        let atv = inst.a.tr_mul_vec(&inst.v).unwrap();
        for v in atv.iter() {
            prop_assert!((v + eps).abs() <= 1e-10);
        }
        let c = inst.first_correlations().unwrap();
        let cf = closed_form_correlations(NoiseModel::LInfBounded, k, d, eps, gamma);
        for ci in &c[..k] {
            prop_assert!((ci - cf.on_support).abs() <= 1e-10);
        }
        prop_assert!((c[k] - cf.off_support).abs() <= 1e-10);
        prop_assert!(cf.off_support.abs() - cf.on_support.abs() > 0.0);
        let trace = run_omp_with(&inst.measurement().unwrap(), &inst.a, StoppingRule::FixedIterations(k), &OmpOptions::default()).unwrap();
        prop_assert_eq!(trace.iterations[0].selected_index, k);
    }

    #[test]
    fn noise_samplers_respect_bounds(seed in any::<u64>(), eps in 0.01f64..10.0, m in 1usize..12) {
        let v = sample_l2_noise(m, eps, seed).unwrap();
        prop_assert!(nrm(&v) <= eps * (1.0 + 1e-12));
        let a = DenseMatrix::new(m, 3, (0..3 * m).map(|i| ((i * 7 % 5) as f64) - 2.0).collect()).unwrap();
        if let Ok(w) = sample_linf_noise(&a, eps, seed) {
            let level = a.tr_mul_vec(&w).unwrap().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            prop_assert!(level <= eps * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lemma1_holds_on_random_instances(seed in any::<u64>(), omega in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = if omega == 1 { 6 } else { 7 };
        let upper = 1.0 / ((omega + 1) as f64).sqrt();
        let (a, _) = random_rip_matrix(m, 8, omega + 1, 0.0, upper, &mut rng).unwrap();
        let x = random_sparse_signal(8, omega, 0.5, &mut rng).unwrap();
        let s = if omega == 2 { vec![x.support()[0]] } else { vec![] };
        let gap = lemma1_gap(&a, &x, &s).unwrap();
        prop_assert!(gap.lhs_gap - gap.rhs_bound >= -1e-10);
    }
}

#[test]
fn u_is_orthogonal_up_to_25() {
    for k in 1..=25 {
        let u = counterexample_orthogonal(k);
        assert!(u.gram().max_abs_diff(&DenseMatrix::identity(k + 1)) <= 1e-12);
    }
}

#[test]
fn beta_identities() {
    for k in 1..=10_000usize {
        let b = beta(k);
        let kf = k as f64;
        assert!(((1.0 - b * b) / (1.0 + b * b) - 1.0 / (kf + 1.0).sqrt()).abs() <= 1e-12, "K = {k}");
        assert!((2.0 * b / (1.0 + b * b) - kf.sqrt() / (kf + 1.0).sqrt()).abs() <= 1e-12, "K = {k}");
    }
}

#[test]
fn closed_form_grid() {
    let mut points = 0;
    for k in 1..=10 {
        for fi in 1..=5 {
            for gi in 1..=4 {
                let d = fi as f64 / 6.0 / ((k + 1) as f64).sqrt();
                let gamma = gi as f64 / 5.0 * gamma_upper_l2(k, d, 1.0);
                let inst = build_counterexample_l2(k, d, 1.0, gamma).unwrap();
                let c = inst.first_correlations().unwrap();
                let cf = closed_form_correlations(NoiseModel::L2Bounded, k, d, 1.0, gamma);
                assert!((c[0] - cf.on_support).abs() <= 1e-10);
                assert!((c[k] - cf.off_support).abs() <= 1e-10);
                points += 1;
            }
        }
    }
    assert_eq!(points, 200);
}

#[test]
fn lemma_three_and_four_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..200 {
        let (a, report) = random_rip_matrix(10, 8, 4, 0.0, 0.6, &mut rng).unwrap();
        let delta = report.delta;
        // disjoint S1 (2 columns) and S2 (2 columns): |S1| + |S2| = 4
        let s1 = [0usize, 3];
        let s2 = [5usize, 6];
        let a1 = a.columns_submatrix(&s1).unwrap();
        let a2 = a.columns_submatrix(&s2).unwrap();
        let x = [0.7, -1.3];
        let w = project_complement(&a1, &a2.mul_vec(&x).unwrap()).unwrap();
        let xx = dot(&x, &x);
        let ww = dot(&w, &w);
        assert!((1.0 - delta) * xx <= ww + 1e-10 && ww <= (1.0 + delta) * xx + 1e-10);
        // ||A_S^T u||^2 <= (1 + delta_|S|) ||u||^2
        let u: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = a.columns_submatrix(&[1, 2, 4, 7]).unwrap();
        let su = s.tr_mul_vec(&u).unwrap();
        assert!(dot(&su, &su) <= (1.0 + delta) * dot(&u, &u) + 1e-10);
    }
}
