//! Gaussian utilities: sampling, moment estimates, the Bures-Wasserstein
//! distance, and the fixed-point Gaussian barycenter used as an oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Eigenvalues below this are clamped when taking matrix square roots.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Mean and covariance of a Gaussian law on R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianParams {
    /// Checks shape, symmetry (1e-12, relative to the largest entry) and
    /// positive definiteness.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Empty("gaussian of dimension zero"));
        }
        if covariance.shape() != (d, d) {
            return Err(Error::ShapeMismatch(format!(
                "covariance {:?} for mean of length {d}",
                covariance.shape()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite gaussian parameter".into()));
        }
        let scale = covariance.amax().max(1.0);
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite(format!("covariance is not symmetric ({asym:e})")));
        }
        let min_eig = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min_eig:e}")));
        }
        Ok(Self { mean, covariance })
    }

    /// `N(mean, I)`.
    pub fn standard(mean: &[f64]) -> Self {
        let d = mean.len();
        Self { mean: DVector::from_column_slice(mean), covariance: DMatrix::identity(d, d) }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|l| f(l.max(EIGEN_FLOOR)));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, f64::sqrt)
}

/// Inverse principal square root of a symmetric PD matrix.
pub fn inv_sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |l| 1.0 / l.sqrt())
}

/// `count` i.i.d. draws as rows, via the Cholesky factor of the covariance.
pub fn sample_with(params: &GaussianParams, count: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    let d = params.dim();
    let chol = params
        .covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let l = chol.l();
    let mut out = Array2::zeros((count, d));
    let mut z = DVector::zeros(d);
    for mut row in out.outer_iter_mut() {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(rng);
        }
        let x = &params.mean + &l * &z;
        for (dst, src) in row.iter_mut().zip(x.iter()) {
            *dst = *src;
        }
    }
    Ok(out)
}

/// Seeded sampling.
pub fn sample(params: &GaussianParams, count: usize, seed: u64) -> Result<Array2<f64>> {
    sample_with(params, count, &mut rng::rng(seed))
}

/// Weighted mean and biased (divide-by-total-weight) covariance. A singular
/// covariance gets `1e-10 * trace / d` added to its diagonal (or `1e-10` when
/// the trace is zero) and a warning is logged.
pub fn mle(points: ArrayView2<'_, f64>, weights: Option<ArrayView1<'_, f64>>) -> Result<GaussianParams> {
    let (n, d) = points.dim();
    if d == 0 {
        return Err(Error::Empty("points have zero dimension"));
    }
    if n < 2 && weights.is_none() {
        return Err(Error::InvalidParameter(format!("need at least 2 points for a covariance, got {n}")));
    }
    if n == 0 {
        return Err(Error::Empty("no points"));
    }
    let w: Vec<f64> = match weights {
        None => vec![1.0 / n as f64; n],
        Some(w) => {
            if w.len() != n {
                return Err(Error::ShapeMismatch(format!("{} weights for {n} points", w.len())));
            }
            let total: f64 = w.sum();
            if !(total > 0.0) || w.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidParameter("weights must be nonnegative with positive sum".into()));
            }
            w.iter().map(|x| x / total).collect()
        }
    };
    let mut mean = DVector::zeros(d);
    for (row, &wi) in points.outer_iter().zip(&w) {
        for k in 0..d {
            mean[k] += wi * row[k];
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (row, &wi) in points.outer_iter().zip(&w) {
        let c = DVector::from_iterator(d, row.iter().copied()) - &mean;
        cov += (&c * c.transpose()) * wi;
    }
    let mut cov = (&cov + cov.transpose()) * 0.5;

    let eig = SymmetricEigen::new(cov.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 1e-12 * hi.max(0.0) {
        let trace = cov.trace();
        let jitter = if trace > 0.0 { 1e-10 * trace / d as f64 } else { 1e-10 };
        log::warn!("singular covariance; adding jitter {jitter:e} to the diagonal");
        for k in 0..d {
            cov[(k, k)] += jitter;
        }
    }
    GaussianParams::new(mean, cov)
}

/// `tr(A + B - 2 (A^{1/2} B A^{1/2})^{1/2})`, floored at zero.
pub fn bures_covariance_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ra = sqrtm(a);
    let cross = sqrtm(&(&ra * b * &ra));
    (a.trace() + b.trace() - 2.0 * cross.trace()).max(0.0)
}

/// 2-Wasserstein distance between two Gaussians.
pub fn bures_distance(a: &GaussianParams, b: &GaussianParams) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let shift = (&a.mean - &b.mean).norm_squared();
    Ok((shift + bures_covariance_sq(&a.covariance, &b.covariance)).sqrt())
}

/// `sum_n pi_n (S^{1/2} Sigma_n S^{1/2})^{1/2}` for the current `S`.
fn averaged_root(s_half: &DMatrix<f64>, family: &[GaussianParams], pi: &[f64]) -> DMatrix<f64> {
    let d = s_half.nrows();
    let mut acc = DMatrix::zeros(d, d);
    for (g, &p) in family.iter().zip(pi) {
        acc += sqrtm(&(s_half * &g.covariance * s_half)) * p;
    }
    acc
}

/// Frobenius norm of `S - sum_n pi_n (S^{1/2} Sigma_n S^{1/2})^{1/2}`; zero
/// exactly at the barycenter covariance.
pub fn fixed_point_residual(candidate: &DMatrix<f64>, family: &[GaussianParams], pi: &[f64]) -> f64 {
    let s_half = sqrtm(candidate);
    (candidate - averaged_root(&s_half, family, pi)).norm()
}

/// Wasserstein barycenter of Gaussians. The mean is `sum pi_n m_n`; the
/// covariance iterates
/// `S <- S^{-1/2} (sum_n pi_n (S^{1/2} Sigma_n S^{1/2})^{1/2})^2 S^{-1/2}`
/// from `S = sum pi_n Sigma_n` until the Frobenius change is below `tol`.
pub fn gaussian_barycenter(family: &[GaussianParams], pi: &[f64], tol: f64, max_iter: usize) -> Result<GaussianParams> {
    let first = family.first().ok_or(Error::Empty("no gaussians"))?;
    let d = first.dim();
    if pi.len() != family.len() {
        return Err(Error::ShapeMismatch(format!("{} weights for {} gaussians", pi.len(), family.len())));
    }
    if let Some(g) = family.iter().find(|g| g.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: g.dim() });
    }
    if pi.iter().any(|&p| !(p > 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("gaussian weights must lie in the open simplex".into()));
    }

    let mut mean = DVector::zeros(d);
    let mut s = DMatrix::zeros(d, d);
    for (g, &p) in family.iter().zip(pi) {
        mean += &g.mean * p;
        s += &g.covariance * p;
    }

    for _ in 0..max_iter {
        let s_half = sqrtm(&s);
        let s_inv_half = inv_sqrtm(&s);
        let root = averaged_root(&s_half, family, pi);
        let next = &s_inv_half * &root * &root * &s_inv_half;
        let next = (&next + next.transpose()) * 0.5;
        let change = (&next - &s).norm();
        s = next;
        if change < tol {
            return GaussianParams::new(mean, s);
        }
    }
    Err(Error::NotConverged { what: "gaussian barycenter", iterations: max_iter })
}

/// Wishart(df, scale) by the Bartlett decomposition.
pub fn wishart(df: f64, scale: &DMatrix<f64>, rng: &mut Rng) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if df <= (d as f64) - 1.0 {
        return Err(Error::InvalidParameter(format!("wishart df {df} too small for dimension {d}")));
    }
    let l = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("wishart scale".into()))?
        .l();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = &l * a;
    let w = &la * la.transpose();
    Ok((&w + w.transpose()) * 0.5)
}

/// The four bivariate benchmark components: means drawn around
/// `10 * ((-1)^floor((i-1)/2), (-1)^(i-1))` with identity covariance, and
/// covariances drawn from Wishart(4, I_2).
pub fn benchmark_components(rng: &mut Rng) -> Result<Vec<GaussianParams>> {
    let eye = DMatrix::identity(2, 2);
    (1..=4)
        .map(|i: i32| {
            let cx = 10.0 * (-1.0f64).powi((i - 1) / 2);
            let cy = 10.0 * (-1.0f64).powi(i - 1);
            let mean = DVector::from_vec(vec![
                cx + rng.sample::<f64, _>(StandardNormal),
                cy + rng.sample::<f64, _>(StandardNormal),
            ]);
            let cov = wishart(4.0, &eye, rng)?;
            GaussianParams::new(mean, cov)
        })
        .collect()
}
