//! Problem instances: the worst-case counterexamples, the fixed 2x2 examples,
//! bounded-noise samplers, random RIP matrices and the Lemma 1 gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_index_set, l2, linf, project_complement, sym_eigen, DenseMatrix, HouseholderQr, Vector};
use crate::omp::SparseSignal;
use crate::ric::{exact_ric_with, in_sharp_region, spectrum_extremes, RicOptions, RicReport};

/// Slack allowed on the noise bound of a stored instance.
pub const NOISE_BOUND_TOLERANCE: f64 = 1e-12;

/// Attempts before [`sample_linf_noise`] gives up on a degenerate matrix.
pub const NOISE_RESAMPLE_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// `||v||_2 <= eps`
    L2Bounded,
    /// `||A^T v||_inf <= eps`
    LInfBounded,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Leading coefficient of the 2x2 examples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

/// A measurement model `y = A x + v` with its declared noise class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "InstanceWire", try_from = "InstanceWire")]
pub struct Instance {
    pub a: DenseMatrix,
    pub x: SparseSignal,
    pub v: Vector,
    pub epsilon: f64,
    pub noise_model: NoiseModel,
    pub metadata: InstanceMetadata,
}

impl Instance {
    /// Checks shapes, `epsilon > 0`, the declared sparsity and the noise bound.
    pub fn new(
        a: DenseMatrix,
        x: SparseSignal,
        v: Vector,
        epsilon: f64,
        noise_model: NoiseModel,
        metadata: InstanceMetadata,
    ) -> Result<Self> {
        if x.len() != a.cols() {
            return Err(Error::DimensionMismatch { operation: "Instance::new (x)", expected: a.cols(), found: x.len() });
        }
        if v.len() != a.rows() {
            return Err(Error::DimensionMismatch { operation: "Instance::new (v)", expected: a.rows(), found: v.len() });
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("epsilon must be positive, got {epsilon}")));
        }
        if let Some(k) = metadata.k {
            if x.sparsity() > k {
                return Err(Error::ParameterOutOfRange(format!(
                    "x has {} nonzeros but K = {k}",
                    x.sparsity()
                )));
            }
        }
        let inst = Self { a, x, v, epsilon, noise_model, metadata };
        let level = inst.noise_level()?;
        if level > epsilon + NOISE_BOUND_TOLERANCE {
            return Err(Error::ParameterOutOfRange(format!(
                "noise level {level} exceeds epsilon {epsilon} under {:?}",
                inst.noise_model
            )));
        }
        Ok(inst)
    }

    /// `y = A x + v`.
    pub fn measurement(&self) -> Result<Vec<f64>> {
        let mut y = self.a.mul_vec(self.x.values())?.into_inner();
        for (yi, vi) in y.iter_mut().zip(self.v.iter()) {
            *yi += vi;
        }
        Ok(y)
    }

    /// `||v||_2` or `||A^T v||_inf`, whichever the noise model bounds.
    pub fn noise_level(&self) -> Result<f64> {
        Ok(match self.noise_model {
            NoiseModel::L2Bounded => l2(&self.v),
            NoiseModel::LInfBounded => linf(&self.a.tr_mul_vec(&self.v)?),
        })
    }

    /// `A^T y`, the correlations OMP ranks in its first iteration.
    pub fn first_correlations(&self) -> Result<Vec<f64>> {
        Ok(self.a.tr_mul_vec(&self.measurement()?)?.into_inner())
    }

    pub fn support(&self) -> &[usize] {
        self.x.support()
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceWire {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    x: Vec<f64>,
    v: Vec<f64>,
    epsilon: f64,
    noise_model: NoiseModel,
    #[serde(default)]
    metadata: InstanceMetadata,
}

impl From<Instance> for InstanceWire {
    fn from(i: Instance) -> Self {
        Self {
            a: i.a.to_rows(),
            x: i.x.into(),
            v: i.v.into_inner(),
            epsilon: i.epsilon,
            noise_model: i.noise_model,
            metadata: i.metadata,
        }
    }
}

impl TryFrom<InstanceWire> for Instance {
    type Error = Error;

    fn try_from(w: InstanceWire) -> Result<Self> {
        let a = if w.a.is_empty() { DenseMatrix::zeros(0, w.x.len()) } else { DenseMatrix::from_rows(&w.a)? };
        Instance::new(a, SparseSignal::new(w.x)?, Vector::new(w.v)?, w.epsilon, w.noise_model, w.metadata)
    }
}

/// `K x (K-1)` matrix with orthonormal columns spanning the complement of `1_K`.
///
/// Takes the trailing columns of the Householder Q factor of `1_K / sqrt(K)`.
pub fn orthonormal_complement_of_ones(k: usize) -> DenseMatrix {
    if k <= 1 {
        return DenseMatrix::zeros(k, 0);
    }
    let ones = DenseMatrix::new(k, 1, vec![1.0 / (k as f64).sqrt(); k]).expect("finite");
    let q = HouseholderQr::new(&ones).q_full();
    let trailing: Vec<usize> = (1..k).collect();
    q.columns_submatrix(&trailing).expect("indices in range")
}

/// `(sqrt(K+1) - 1) / sqrt(K)`.
pub fn beta(k: usize) -> f64 {
    (((k + 1) as f64).sqrt() - 1.0) / (k as f64).sqrt()
}

/// Orthogonal factor `U` of the counterexample matrix `A = D U`.
///
/// `U^T` has the complement basis of `1_K` (padded with a zero row) followed
/// by two columns mixing `1_K` with the last coordinate through `beta`.
pub fn counterexample_orthogonal(k: usize) -> DenseMatrix {
    let n = k + 1;
    let b = beta(k);
    let norm = (b * b + 1.0).sqrt();
    let block = 1.0 / ((k as f64) * (b * b + 1.0)).sqrt();
    let xi = orthonormal_complement_of_ones(k);
    // columns of U^T
    let mut ut = vec![0.0; n * n];
    for j in 0..k - 1 {
        ut[j * n..j * n + k].copy_from_slice(xi.column(j));
    }
    let c1 = (k - 1) * n;
    let c2 = k * n;
    for i in 0..k {
        ut[c1 + i] = block;
        ut[c2 + i] = b * block;
    }
    ut[c1 + k] = b / norm;
    ut[c2 + k] = -1.0 / norm;
    DenseMatrix::new(n, n, ut).expect("finite").transpose()
}

/// Diagonal of `D`: `sqrt(1-delta)` in position K (1-based), `sqrt(1+delta)` elsewhere.
pub fn counterexample_scaling(k: usize, delta: f64) -> Vec<f64> {
    let mut d = vec![(1.0 + delta).sqrt(); k + 1];
    d[k - 1] = (1.0 - delta).sqrt();
    d
}

/// Upper end of the open gamma range for the l2 counterexample.
pub fn gamma_upper_l2(k: usize, delta: f64, eps: f64) -> f64 {
    (1.0 - delta).sqrt() * eps / (1.0 - ((k + 1) as f64).sqrt() * delta)
}

/// Upper end of the open gamma range for the l-infinity counterexample.
pub fn gamma_upper_linf(k: usize, delta: f64, eps: f64) -> f64 {
    2.0 * eps / (1.0 - ((k + 1) as f64).sqrt() * delta)
}

/// First-iteration correlations `<y, A_i>` of a counterexample instance, in
/// closed form: the common value on the support and the value at index K+1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormCorrelations {
    pub on_support: f64,
    pub off_support: f64,
}

pub fn closed_form_correlations(noise_model: NoiseModel, k: usize, delta: f64, eps: f64, gamma: f64) -> ClosedFormCorrelations {
    let root = ((k + 1) as f64).sqrt();
    let signal_on = (1.0 - delta / root) * gamma;
    let signal_off = -(k as f64) * delta * gamma / root;
    match noise_model {
        NoiseModel::L2Bounded => ClosedFormCorrelations {
            on_support: signal_on,
            off_support: signal_off - (1.0 - delta).sqrt() * eps,
        },
        NoiseModel::LInfBounded => ClosedFormCorrelations { on_support: signal_on - eps, off_support: signal_off - eps },
    }
}

struct Counterexample {
    u: DenseMatrix,
    d: Vec<f64>,
    a: DenseMatrix,
    x: SparseSignal,
}

fn counterexample_parts(k: usize, delta: f64, eps: f64, gamma: f64, upper: f64) -> Result<Counterexample> {
    if k == 0 || delta <= 0.0 || !in_sharp_region(k, delta) {
        return Err(Error::OutOfSharpRegion { k, delta });
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("epsilon must be positive, got {eps}")));
    }
    if !(gamma > 0.0 && gamma < upper) {
        return Err(Error::GammaOutOfRange { gamma, upper });
    }
    let u = counterexample_orthogonal(k);
    let d = counterexample_scaling(k, delta);
    let a = DenseMatrix::from_diagonal(&d)?.matmul(&u)?;
    let mut x = vec![gamma; k + 1];
    x[k] = 0.0;
    Ok(Counterexample { u, d, a, x: SparseSignal::new(x)? })
}

/// `D^{-1} U w`.
fn noise_from_target(parts: &Counterexample, w: &[f64]) -> Result<Vector> {
    let uw = parts.u.mul_vec(w)?;
    Vector::new(uw.iter().zip(&parts.d).map(|(u, d)| u / d).collect())
}

/// Worst case for `||v||_2 <= eps`: OMP picks index K+1 first even though
/// every support entry equals `gamma`.
///
/// Requires `0 < delta < 1/sqrt(K+1)` and
/// `0 < gamma < sqrt(1-delta) eps / (1 - sqrt(K+1) delta)`.
pub fn build_counterexample_l2(k: usize, delta: f64, eps: f64, gamma: f64) -> Result<Instance> {
    let upper = gamma_upper_l2(k, delta, eps);
    let parts = counterexample_parts(k, delta, eps, gamma, upper)?;
    let mut w = vec![0.0; k + 1];
    w[k] = -(1.0 - delta).sqrt() * eps;
    let v = noise_from_target(&parts, &w)?;
    Instance::new(
        parts.a,
        parts.x,
        v,
        eps,
        NoiseModel::L2Bounded,
        InstanceMetadata { kind: Some("l2".into()), k: Some(k), delta: Some(delta), gamma: Some(gamma), a: None },
    )
}

/// Worst case for `||A^T v||_inf <= eps`, with `A^T v = -eps 1`.
///
/// Requires `0 < delta < 1/sqrt(K+1)` and `0 < gamma < 2 eps / (1 - sqrt(K+1) delta)`.
pub fn build_counterexample_linf(k: usize, delta: f64, eps: f64, gamma: f64) -> Result<Instance> {
    let upper = gamma_upper_linf(k, delta, eps);
    let parts = counterexample_parts(k, delta, eps, gamma, upper)?;
    let v = noise_from_target(&parts, &vec![-eps; k + 1])?;
    Instance::new(
        parts.a,
        parts.x,
        v,
        eps,
        NoiseModel::LInfBounded,
        InstanceMetadata { kind: Some("linf".into()), k: Some(k), delta: Some(delta), gamma: Some(gamma), a: None },
    )
}

fn check_open(name: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value > lo && value < hi {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("{name} = {value} must lie in ({lo}, {hi})")))
    }
}

/// Unit-norm columns, `||A^T v||_inf = 1`, and the naive rule
/// `||A^T r||_inf <= 1` picks up the wrong second column however large `a` is.
///
/// Requires `0 < delta < 1` and `a > (1+delta)/(1-delta)`.
pub fn build_example1(delta: f64, a: f64) -> Result<Instance> {
    check_open("delta", delta, 0.0, 1.0)?;
    check_open("a", a, (1.0 + delta) / (1.0 - delta), f64::INFINITY)?;
    let s = (1.0 - delta * delta).sqrt();
    let mat = DenseMatrix::from_rows(&[vec![s, 0.0], vec![delta, 1.0]])?;
    Instance::new(
        mat,
        SparseSignal::new(vec![a, 0.0])?,
        Vector::new(vec![-2.0 * delta / s, 1.0])?,
        1.0,
        NoiseModel::LInfBounded,
        InstanceMetadata { kind: Some("example1".into()), k: Some(1), delta: Some(delta), gamma: None, a: Some(a) },
    )
}

fn scaled_identity_example(kind: &str, delta: f64, a: f64, a_upper: f64, eps: f64, noise_model: NoiseModel) -> Result<Instance> {
    check_open("delta", delta, 0.0, std::f64::consts::FRAC_1_SQRT_2)?;
    check_open("a", a, 0.0, a_upper)?;
    Instance::new(
        DenseMatrix::identity(2).scaled(delta),
        SparseSignal::new(vec![a, 0.0])?,
        Vector::new(vec![1.0, 1.0])?,
        eps,
        noise_model,
        InstanceMetadata { kind: Some(kind.into()), k: Some(1), delta: Some(delta), gamma: None, a: Some(a) },
    )
}

/// `A = delta I_2`, `x = (a, 0)`, `v = (1, 1)`, `eps = sqrt(2)` under l2 noise.
///
/// Requires `0 < delta < 1/sqrt(2)` and `0 < a < sqrt(2(1-delta)) / (1 - sqrt(2) delta)`.
pub fn build_example2(delta: f64, a: f64) -> Result<Instance> {
    let upper = (2.0 * (1.0 - delta)).sqrt() / (1.0 - 2f64.sqrt() * delta);
    scaled_identity_example("example2", delta, a, upper, 2f64.sqrt(), NoiseModel::L2Bounded)
}

/// `A = delta I_2`, `x = (a, 0)`, `v = (1, 1)`, `eps = sqrt(2) delta` under
/// l-infinity noise.
///
/// Requires `0 < delta < 1/sqrt(2)` and `0 < a < 2 sqrt(2) delta / (1 - sqrt(2) delta)`.
pub fn build_example3(delta: f64, a: f64) -> Result<Instance> {
    let upper = 2.0 * 2f64.sqrt() * delta / (1.0 - 2f64.sqrt() * delta);
    scaled_identity_example("example3", delta, a, upper, 2f64.sqrt() * delta, NoiseModel::LInfBounded)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Gap {
    pub lhs_gap: f64,
    pub rhs_bound: f64,
    /// Exact `delta_{|Omega|+1}` used in the bound.
    pub delta: f64,
}

/// Both sides of the Lemma 1 inequality for `S` a proper subset of `supp(x)`.
///
/// With `R = supp(x) \ S` and `w = P_S^perp A_R x_R`:
/// `lhs = ||A_R^T w||_inf - ||A_{Omega^c}^T w||_inf` and
/// `rhs = (1 - sqrt(|R|+1) delta_{|Omega|+1}) ||x_R||_2 / sqrt(|R|)`.
pub fn lemma1_gap(a: &DenseMatrix, x: &SparseSignal, s: &[usize]) -> Result<Lemma1Gap> {
    lemma1_gap_with(a, x, s, &RicOptions::default())
}

pub fn lemma1_gap_with(a: &DenseMatrix, x: &SparseSignal, s: &[usize], options: &RicOptions) -> Result<Lemma1Gap> {
    check_lemma1_sets(a, x, s)?;
    let delta = exact_ric_with(a, x.sparsity() + 1, options)?.delta;
    lemma1_gap_given_delta(a, x, s, delta)
}

fn check_lemma1_sets(a: &DenseMatrix, x: &SparseSignal, s: &[usize]) -> Result<()> {
    if x.len() != a.cols() {
        return Err(Error::DimensionMismatch { operation: "lemma1_gap", expected: a.cols(), found: x.len() });
    }
    check_index_set(s, a.cols())?;
    if s.len() >= x.sparsity() || s.iter().any(|i| x.support().binary_search(i).is_err()) {
        return Err(Error::NotProperSubset);
    }
    Ok(())
}

/// [`lemma1_gap`] with a caller-supplied `delta_{|Omega|+1}`.
pub fn lemma1_gap_given_delta(a: &DenseMatrix, x: &SparseSignal, s: &[usize], delta: f64) -> Result<Lemma1Gap> {
    check_lemma1_sets(a, x, s)?;
    let rest: Vec<usize> = x.support().iter().copied().filter(|i| !s.contains(i)).collect();
    let x_rest: Vec<f64> = rest.iter().map(|&i| x.values()[i]).collect();
    let a_s = a.columns_submatrix(s)?;
    let a_rest = a.columns_submatrix(&rest)?;
    let w = project_complement(&a_s, &a_rest.mul_vec(&x_rest)?)?;
    let corr = a.tr_mul_vec(&w)?;
    let on_rest = rest.iter().map(|&i| corr[i].abs()).fold(0.0, f64::max);
    let off_support = (0..a.cols())
        .filter(|i| x.support().binary_search(i).is_err())
        .map(|i| corr[i].abs())
        .fold(0.0, f64::max);
    let r = rest.len() as f64;
    Ok(Lemma1Gap {
        lhs_gap: on_rest - off_support,
        rhs_bound: (1.0 - (r + 1.0).sqrt() * delta) * l2(&x_rest) / r.sqrt(),
        delta,
    })
}

fn check_noise_level(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("epsilon must be positive, got {eps}")))
    }
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform on `(0, 1]`.
fn unit_interval<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Uniform draw from the l2 ball of radius `eps` in `R^m`.
pub fn sample_l2_noise(m: usize, eps: f64, seed: u64) -> Result<Vector> {
    sample_l2_noise_from(m, eps, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_l2_noise_from<R: Rng + ?Sized>(m: usize, eps: f64, rng: &mut R) -> Result<Vector> {
    check_noise_level(eps)?;
    if m == 0 {
        return Err(Error::ParameterOutOfRange("noise length must be positive".into()));
    }
    let g = loop {
        let g = gaussian_vector(rng, m);
        if l2(&g) > 0.0 {
            break g;
        }
    };
    let radius = unit_interval(rng).powf(1.0 / m as f64) * eps;
    let scale = radius / l2(&g);
    Vector::new(g.into_iter().map(|v| v * scale).collect())
}

/// Gaussian direction rescaled so that `||A^T v||_inf = c eps` with `c`
/// uniform on `(0, 1]`.
pub fn sample_linf_noise(a: &DenseMatrix, eps: f64, seed: u64) -> Result<Vector> {
    sample_linf_noise_from(a, eps, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_linf_noise_from<R: Rng + ?Sized>(a: &DenseMatrix, eps: f64, rng: &mut R) -> Result<Vector> {
    check_noise_level(eps)?;
    for _ in 0..NOISE_RESAMPLE_LIMIT {
        let g = gaussian_vector(rng, a.rows());
        let level = linf(&a.tr_mul_vec(&g)?);
        if level > 0.0 {
            let scale = unit_interval(rng) * eps / level;
            return Vector::new(g.into_iter().map(|v| v * scale).collect());
        }
    }
    Err(Error::DegenerateMatrix)
}

/// Perturbation attempts before [`random_rip_matrix`] gives up.
const RIP_ATTEMPTS: usize = 40;

/// Random `m x n` matrix whose exact `delta_order` lies in `(lower, upper)`.
///
/// Starts from orthonormal columns (`m >= n`) or a unit-norm tight frame
/// (`m < n`), adds a Gaussian perturbation and then rescales. For a fixed
/// matrix the scale `c` with `c^2 lambda_max = 1 + t` gives `delta = t` for
/// every `t` at least the scale-optimal constant, so the target is hit in
/// closed form; perturbations too large to reach `upper` are halved and
/// redrawn.
pub fn random_rip_matrix<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    order: usize,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<(DenseMatrix, RicReport)> {
    if !(0.0 <= lower && lower < upper && upper < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("target interval ({lower}, {upper}) must sit inside [0, 1)")));
    }
    if m == 0 || order == 0 || order > n || order > m {
        return Err(Error::InvalidOrder { order, cols: n });
    }
    let options = RicOptions { threads: Some(1), ..RicOptions::default() };
    let mut sigma = 0.3;
    for _ in 0..RIP_ATTEMPTS {
        let base = orthonormal_base(m, n, rng)?;
        let noise = gaussian_vector(rng, m * n);
        let spread = sigma / (m as f64).sqrt();
        let data = base.as_col_major().iter().zip(&noise).map(|(b, g)| b + spread * g).collect();
        let candidate = DenseMatrix::new(m, n, data)?;
        let ext = spectrum_extremes(&candidate, order, &options)?;
        if ext.min_eigenvalue <= 0.0 {
            sigma *= 0.5;
            continue;
        }
        let best = (ext.max_eigenvalue - ext.min_eigenvalue) / (ext.max_eigenvalue + ext.min_eigenvalue);
        let lo = best.max(lower);
        if lo >= upper {
            sigma *= 0.5;
            continue;
        }
        let target = lo + (upper - lo) * (0.02 + 0.96 * rng.random::<f64>());
        let c = ((1.0 + target) / ext.max_eigenvalue).sqrt();
        let scaled = candidate.scaled(c);
        let report = exact_ric_with(&scaled, order, &options)?;
        if report.delta > lower && report.delta < upper {
            return Ok((scaled, report));
        }
    }
    Err(Error::ParameterOutOfRange(format!(
        "no {m}x{n} matrix with delta_{order} in ({lower}, {upper}) after {RIP_ATTEMPTS} attempts"
    )))
}

fn orthonormal_base<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<DenseMatrix> {
    let (tall, wide) = (m.max(n), m.min(n));
    let g = DenseMatrix::new(tall, wide, gaussian_vector(rng, tall * wide))?;
    let q = HouseholderQr::new(&g).q_full();
    let lead: Vec<usize> = (0..wide).collect();
    let q = q.columns_submatrix(&lead)?;
    if m >= n {
        return Ok(q);
    }
    // alternate between unit columns and the nearest tight frame
    let mut frame = q.transpose();
    for _ in 0..FRAME_SWEEPS {
        frame = normalize_columns(&frame)?;
        frame = nearest_tight_frame(&frame)?;
    }
    normalize_columns(&frame)
}

const FRAME_SWEEPS: usize = 30;

fn normalize_columns(a: &DenseMatrix) -> Result<DenseMatrix> {
    let mut data = a.as_col_major().to_vec();
    for col in data.chunks_mut(a.rows()) {
        let norm = l2(col);
        if norm == 0.0 {
            return Err(Error::DegenerateMatrix);
        }
        col.iter_mut().for_each(|v| *v /= norm);
    }
    DenseMatrix::new(a.rows(), a.cols(), data)
}

/// `sqrt(n/m) (A A^T)^{-1/2} A`, the closest frame with `A A^T = (n/m) I`.
fn nearest_tight_frame(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, n) = (a.rows(), a.cols());
    let eig = sym_eigen(&a.transpose().gram())?;
    if eig.values[0] <= 0.0 {
        return Err(Error::RankDeficient { operation: "nearest_tight_frame" });
    }
    let mut inv_root = DenseMatrix::zeros(m, m);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let w = 1.0 / lambda.sqrt();
        for j in 0..m {
            for i in 0..m {
                let cur = inv_root.get(i, j);
                inv_root.set(i, j, cur + w * eig.vectors.get(i, k) * eig.vectors.get(j, k));
            }
        }
    }
    Ok(inv_root.matmul(a)?.scaled((n as f64 / m as f64).sqrt()))
}

/// `K`-sparse signal on a uniformly random support with magnitudes in
/// `[min_magnitude, 2 min_magnitude]`, random signs, and at least one entry
/// equal to `min_magnitude` up to sign.
pub fn random_sparse_signal<R: Rng + ?Sized>(n: usize, k: usize, min_magnitude: f64, rng: &mut R) -> Result<SparseSignal> {
    if k == 0 || k > n {
        return Err(Error::ParameterOutOfRange(format!("sparsity {k} must lie in 1..={n}")));
    }
    if !(min_magnitude.is_finite() && min_magnitude > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("minimum magnitude must be positive, got {min_magnitude}")));
    }
    let mut support = rand::seq::index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    let values: Vec<f64> = (0..k)
        .map(|j| {
            let mag = if j == 0 { min_magnitude } else { min_magnitude * (1.0 + rng.random::<f64>()) };
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    SparseSignal::from_support(n, &support, &values)
}
