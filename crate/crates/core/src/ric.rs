//! Exact restricted isometry constants by exhaustive subset enumeration.
//!
//! The order-K constant of `A` is the largest deviation from one of any
//! eigenvalue of a K x K principal submatrix of the Gram matrix `A^T A`.
//! Subsets are visited in lexicographic order and ties resolve to the first
//! subset reached, so the witness is reproducible and independent of how the
//! enumeration is split across threads.

use serde::{Deserialize, Serialize};

use crate::concurrency;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, sym_eigen_extremes, DenseMatrix};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Below this many subsets the enumeration stays on the calling thread.
const PARALLEL_THRESHOLD: u128 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RicOptions {
    /// Largest number of subsets the enumeration may visit.
    pub budget: u64,
    /// Worker cap; `None` defers to `OMP_SHARP_THREADS` or the machine.
    pub threads: Option<usize>,
}

impl Default for RicOptions {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, threads: None }
    }
}

/// Exact order-K restricted isometry constant and the subset attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RicReportWire", try_from = "RicReportWire")]
pub struct RicReport {
    pub order: usize,
    pub delta: f64,
    /// Zero-based column indices, ascending.
    pub witness_subset: Vec<usize>,
    /// The Gram eigenvalue on the witness subset that sets `delta`.
    pub witness_eigenvalue: f64,
}

/// Serialized form: indices are 1-based.
#[derive(Serialize, Deserialize)]
struct RicReportWire {
    order: usize,
    delta: f64,
    witness_subset: Vec<usize>,
    witness_eigenvalue: f64,
}

impl From<RicReport> for RicReportWire {
    fn from(r: RicReport) -> Self {
        Self {
            order: r.order,
            delta: r.delta,
            witness_subset: r.witness_subset.iter().map(|i| i + 1).collect(),
            witness_eigenvalue: r.witness_eigenvalue,
        }
    }
}

impl TryFrom<RicReportWire> for RicReport {
    type Error = String;

    fn try_from(w: RicReportWire) -> std::result::Result<Self, String> {
        let witness_subset = w
            .witness_subset
            .iter()
            .map(|&i| i.checked_sub(1).ok_or_else(|| "witness indices are 1-based".to_string()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self {
            order: w.order,
            delta: w.delta,
            witness_subset,
            witness_eigenvalue: w.witness_eigenvalue,
        })
    }
}

/// Extreme Gram eigenvalues over all subsets of one size.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumExtremes {
    pub order: usize,
    pub min_eigenvalue: f64,
    pub min_subset: Vec<usize>,
    pub max_eigenvalue: f64,
    pub max_subset: Vec<usize>,
}

impl SpectrumExtremes {
    /// Restricted isometry constant of `c * A` where these extremes belong to `A`.
    pub fn delta_at_scale(&self, c: f64) -> f64 {
        let c2 = c * c;
        (c2 * self.max_eigenvalue - 1.0).max(1.0 - c2 * self.min_eigenvalue)
    }

    pub fn to_report(&self) -> RicReport {
        let upper = self.max_eigenvalue - 1.0;
        let lower = 1.0 - self.min_eigenvalue;
        let use_upper = match upper.total_cmp(&lower) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.max_subset <= self.min_subset,
        };
        if use_upper {
            RicReport {
                order: self.order,
                delta: upper,
                witness_subset: self.max_subset.clone(),
                witness_eigenvalue: self.max_eigenvalue,
            }
        } else {
            RicReport {
                order: self.order,
                delta: lower,
                witness_subset: self.min_subset.clone(),
                witness_eigenvalue: self.min_eigenvalue,
            }
        }
    }
}

/// `n` choose `k`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        loop {
            let remaining = binomial(n - next - 1, k - slot - 1);
            if rank < remaining {
                break;
            }
            rank -= remaining;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}

/// Advances `comb` to its lexicographic successor; false after the last one.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn scan_chunk(gram: &DenseMatrix, n: usize, k: usize, start: u128, count: u128) -> Result<SpectrumExtremes> {
    let mut comb = unrank_combination(n, k, start);
    let mut best = SpectrumExtremes {
        order: k,
        min_eigenvalue: f64::INFINITY,
        min_subset: Vec::new(),
        max_eigenvalue: f64::NEG_INFINITY,
        max_subset: Vec::new(),
    };
    let mut visited = 0u128;
    loop {
        let (lo, hi) = if k == 1 {
            let g = gram.get(comb[0], comb[0]);
            (g, g)
        } else {
            sym_eigen_extremes(&gram.principal_submatrix(&comb))?
        };
        if lo < best.min_eigenvalue {
            best.min_eigenvalue = lo;
            best.min_subset.clone_from(&comb);
        }
        if hi > best.max_eigenvalue {
            best.max_eigenvalue = hi;
            best.max_subset.clone_from(&comb);
        }
        visited += 1;
        if visited == count || !next_combination(&mut comb, n) {
            break;
        }
    }
    Ok(best)
}

/// Smallest and largest Gram eigenvalue over every `order`-subset of columns.
pub fn spectrum_extremes(a: &DenseMatrix, order: usize, options: &RicOptions) -> Result<SpectrumExtremes> {
    let n = a.cols();
    if order == 0 || order > n {
        return Err(Error::InvalidOrder { order, cols: n });
    }
    let total = binomial(n, order);
    if total > options.budget as u128 {
        return Err(Error::BudgetExceeded { requested: total, budget: options.budget });
    }
    let gram = a.gram();
    let threads = options.threads.unwrap_or_else(concurrency::max_threads).max(1);
    if total < PARALLEL_THRESHOLD || threads == 1 {
        return scan_chunk(&gram, n, order, 0, total);
    }

    let chunks = (threads as u128).min(total);
    let base = total / chunks;
    let extra = total % chunks;
    let mut ranges = Vec::with_capacity(chunks as usize);
    let mut start = 0u128;
    for c in 0..chunks {
        let len = base + u128::from(c < extra);
        ranges.push((start, len));
        start += len;
    }
    let partials: Vec<Result<SpectrumExtremes>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(s, len)| {
                let gram = &gram;
                scope.spawn(move || scan_chunk(gram, n, order, s, len))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("enumeration worker panicked")).collect()
    });

    // chunks are in lexicographic order, so strict comparisons keep the first witness
    let mut iter = partials.into_iter();
    let mut best = iter.next().expect("at least one chunk")?;
    for part in iter {
        let part = part?;
        if part.min_eigenvalue < best.min_eigenvalue {
            best.min_eigenvalue = part.min_eigenvalue;
            best.min_subset = part.min_subset;
        }
        if part.max_eigenvalue > best.max_eigenvalue {
            best.max_eigenvalue = part.max_eigenvalue;
            best.max_subset = part.max_subset;
        }
    }
    Ok(best)
}

/// Exact order-K restricted isometry constant with the default budget.
pub fn exact_ric(a: &DenseMatrix, order: usize) -> Result<RicReport> {
    exact_ric_with(a, order, &RicOptions::default())
}

pub fn exact_ric_with(a: &DenseMatrix, order: usize, options: &RicOptions) -> Result<RicReport> {
    Ok(spectrum_extremes(a, order, options)?.to_report())
}

/// Reports for every order from 1 to `max_order`.
pub fn exact_ric_all_orders(a: &DenseMatrix, max_order: usize, options: &RicOptions) -> Result<Vec<RicReport>> {
    (1..=max_order).map(|k| exact_ric_with(a, k, options)).collect()
}

/// Unit vector on the witness subset whose Rayleigh quotient is the witness
/// eigenvalue, embedded in the full column space.
pub fn witness_vector(a: &DenseMatrix, report: &RicReport) -> Result<Vec<f64>> {
    let sub = a.columns_submatrix(&report.witness_subset)?;
    let eig = sym_eigen(&sub.gram())?;
    let pick = if (report.witness_eigenvalue - eig.values[0]).abs()
        <= (report.witness_eigenvalue - eig.values[eig.values.len() - 1]).abs()
    {
        0
    } else {
        eig.values.len() - 1
    };
    let mut x = vec![0.0; a.cols()];
    for (slot, &col) in report.witness_subset.iter().enumerate() {
        x[col] = eig.vectors.get(slot, pick);
    }
    Ok(x)
}

/// Whether `delta < 1/sqrt(K+1)`.
///
/// Evaluated as `delta^2 (K+1) < 1` with the square carried in double-double
/// precision, so values that round onto the boundary are classified by their
/// exact binary value. The boundary itself is excluded.
pub fn in_sharp_region(k: usize, delta: f64) -> bool {
    if !(0.0..1.0).contains(&delta) || k == 0 {
        return false;
    }
    let kp1 = (k + 1) as f64;
    let sq_hi = delta * delta;
    let sq_lo = delta.mul_add(delta, -sq_hi);
    let prod_hi = sq_hi * kp1;
    let prod_lo = sq_hi.mul_add(kp1, -prod_hi) + sq_lo * kp1;
    (prod_hi - 1.0) + prod_lo < 0.0
}

/// Tolerance-aware check of `(1-δ)||x||² <= ||Ax||² <= (1+δ)||x||²`.
pub fn check_rip_inequality(a: &DenseMatrix, x: &[f64], delta: f64) -> Result<bool> {
    if x.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            operation: "check_rip_inequality",
            expected: a.cols(),
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("check_rip_inequality"));
    }
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let ax = a.mul_vec(x)?;
    let axx: f64 = ax.iter().map(|v| v * v).sum();
    let tol = 1e-10 * xx;
    Ok((1.0 - delta) * xx - tol <= axx && axx <= (1.0 + delta) * xx + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example1_matrix(delta: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![(1.0 - delta * delta).sqrt(), 0.0], vec![delta, 1.0]]).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::new(rows, cols, data).unwrap()
    }

    /// Straightforward enumeration used to cross-check the chunked scan.
    fn brute_force_delta(a: &DenseMatrix, k: usize) -> (f64, f64, f64) {
        let n = a.cols();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let g = a.columns_submatrix(&idx).unwrap().gram();
            let na = nalgebra::DMatrix::from_column_slice(k, k, g.as_col_major());
            for v in na.symmetric_eigen().eigenvalues.iter() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        ((hi - 1.0).max(1.0 - lo), lo, hi)
    }

    #[test]
    fn identity_has_zero_constant() {
        for k in 1..=4 {
            let r = exact_ric(&DenseMatrix::identity(4), k).unwrap();
            assert_eq!(r.delta, 0.0);
            assert_eq!(r.witness_subset, (0..k).collect::<Vec<_>>());
        }
    }

    #[test]
    fn example1_constant_equals_delta() {
        for d in [0.1, 0.5, 0.9] {
            let r = exact_ric(&example1_matrix(d), 2).unwrap();
            assert_abs_diff_eq!(r.delta, d, epsilon = 1e-12);
            let r1 = exact_ric(&example1_matrix(d), 1).unwrap();
            assert_abs_diff_eq!(r1.delta, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn scaled_identity_stress_case() {
        let a = DenseMatrix::identity(2).scaled(0.6);
        let r = exact_ric(&a, 2).unwrap();
        assert_abs_diff_eq!(r.delta, 1.0 - 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(r.witness_eigenvalue, 0.36, epsilon = 1e-15);
    }

    #[test]
    fn errors() {
        let a = DenseMatrix::identity(3);
        assert_eq!(exact_ric(&a, 0), Err(Error::InvalidOrder { order: 0, cols: 3 }));
        assert_eq!(exact_ric(&a, 4), Err(Error::InvalidOrder { order: 4, cols: 3 }));
        let wide = DenseMatrix::zeros(2, 40);
        let opts = RicOptions { budget: 1000, threads: None };
        assert_eq!(
            exact_ric_with(&wide, 5, &opts),
            Err(Error::BudgetExceeded { requested: binomial(40, 5), budget: 1000 })
        );
    }

    #[test]
    fn combinatorics() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(25, 5), 53130);
        assert_eq!(binomial(3, 4), 0);
        let mut comb = vec![0, 1];
        let mut all = vec![comb.clone()];
        while next_combination(&mut comb, 4) {
            all.push(comb.clone());
        }
        assert_eq!(all.len(), 6);
        for (rank, c) in all.iter().enumerate() {
            assert_eq!(&unrank_combination(4, 2, rank as u128), c);
        }
    }

    #[test]
    fn matches_brute_force_and_is_schedule_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 5, 7);
            for k in 1..=4 {
                let (delta, _, _) = brute_force_delta(&a, k);
                let serial = exact_ric_with(&a, k, &RicOptions { threads: Some(1), ..Default::default() }).unwrap();
                assert_abs_diff_eq!(serial.delta, delta, epsilon = 1e-10);
            }
        }
        // enough subsets to take the threaded path
        let a = random_matrix(&mut rng, 8, 16);
        let serial = exact_ric_with(&a, 4, &RicOptions { threads: Some(1), ..Default::default() }).unwrap();
        for t in [2, 3, 7] {
            let par = exact_ric_with(&a, 4, &RicOptions { threads: Some(t), ..Default::default() }).unwrap();
            assert_eq!(par, serial);
        }
    }

    #[test]
    fn witness_reproduces_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4, 6);
            for k in 1..=3 {
                let r = exact_ric(&a, k).unwrap();
                let z = witness_vector(&a, &r).unwrap();
                let az = a.mul_vec(&z).unwrap();
                let q: f64 = az.iter().map(|v| v * v).sum::<f64>() / z.iter().map(|v| v * v).sum::<f64>();
                assert_abs_diff_eq!((q - 1.0).abs(), r.delta, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn scaling_follows_gram_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 3, 4);
            let ext = spectrum_extremes(&a, 2, &RicOptions::default()).unwrap();
            for c in [0.3, 0.9, 1.7] {
                let (expected, _, _) = brute_force_delta(&a.scaled(c), 2);
                assert_abs_diff_eq!(ext.delta_at_scale(c), expected, epsilon = 1e-10);
                assert_abs_diff_eq!(exact_ric(&a.scaled(c), 2).unwrap().delta, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sharp_region_examples() {
        assert!(in_sharp_region(1, 0.7));
        assert!(!in_sharp_region(3, 0.5));
        assert!(in_sharp_region(8, 0.2));
        assert!(!in_sharp_region(8, 1.0 / 3.0 + 1e-16));
        // the double nearest 1/sqrt(2) sits above it
        assert!(!in_sharp_region(1, std::f64::consts::FRAC_1_SQRT_2));
        assert!(in_sharp_region(1, f64::from_bits(std::f64::consts::FRAC_1_SQRT_2.to_bits() - 1)));
        assert!(!in_sharp_region(2, -0.1));
    }

    #[test]
    fn rip_inequality_examples() {
        assert!(check_rip_inequality(&DenseMatrix::identity(3), &[1.0, -2.0, 0.5], 0.0).unwrap());
        let d = 0.6;
        let a = example1_matrix(d);
        assert!(check_rip_inequality(&a, &[1.0, 0.0], d).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(check_rip_inequality(&a, &[s, s], d).unwrap());
        assert!(!check_rip_inequality(&a, &[s, s], d / 2.0).unwrap());
        assert!(check_rip_inequality(&a, &[1.0], d).is_err());
    }
}
