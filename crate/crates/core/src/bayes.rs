//! Conjugate Bayesian linear regression and Wasserstein posterior (WASP)
//! aggregation of subset posteriors.
//!
//! With a Gaussian prior `N(m0, V0)` and known noise variance, every
//! posterior here is Gaussian in closed form, so subset posteriors are
//! sampled exactly instead of by MCMC.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::barycenter::{self, SolverOptions};
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianParams};
use crate::measures::{DiscreteMeasure, WeightedFamily};
use crate::rng::{self, Rng};

/// Alias used where a Gaussian plays the role of a posterior over coefficients.
pub type PosteriorParams = GaussianParams;

#[derive(Debug, Clone)]
pub struct RegressionData {
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    pub true_beta: DVector<f64>,
    pub sigma2: f64,
}

impl RegressionData {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>, true_beta: DVector<f64>, sigma2: f64) -> Result<Self> {
        if design.nrows() != response.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} design rows but {} responses",
                design.nrows(),
                response.len()
            )));
        }
        if design.ncols() != true_beta.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} design columns but {} coefficients",
                design.ncols(),
                true_beta.len()
            )));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance {sigma2} must be positive")));
        }
        Ok(Self { design, response, true_beta, sigma2 })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    /// Rows `idx` of the data set.
    pub fn select(&self, idx: &[usize]) -> Self {
        let design = self.design.select_rows(idx.iter());
        let response = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.response[i]));
        Self { design, response, true_beta: self.true_beta.clone(), sigma2: self.sigma2 }
    }
}

/// `y = X beta + sigma * eps` with standard normal covariates and noise.
pub fn generate_data(n: usize, beta: &[f64], sigma2: f64, rng: &mut Rng) -> Result<RegressionData> {
    let p = beta.len();
    if p == 0 || n < p {
        return Err(Error::InvalidParameter(format!("need n >= p >= 1, got n = {n}, p = {p}")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance {sigma2} must be positive")));
    }
    let beta = DVector::from_column_slice(beta);
    let sigma = sigma2.sqrt();
    let mut design = DMatrix::zeros(n, p);
    let mut response = DVector::zeros(n);
    for i in 0..n {
        for k in 0..p {
            design[(i, k)] = StandardNormal.sample(rng);
        }
        let eps: f64 = StandardNormal.sample(rng);
        response[i] = design.row(i).dot(&beta.transpose()) + sigma * eps;
    }
    RegressionData::new(design, response, beta, sigma2)
}

/// Seeded [`generate_data`].
pub fn generate_data_seeded(n: usize, beta: &[f64], sigma2: f64, seed: u64) -> Result<RegressionData> {
    generate_data(n, beta, sigma2, &mut rng::rng(seed))
}

/// `N(0, 16 I_p)`.
pub fn default_prior(p: usize) -> GaussianParams {
    GaussianParams::new(DVector::zeros(p), DMatrix::identity(p, p) * 16.0).expect("16 I is positive definite")
}

fn spd_inverse(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Posterior with the likelihood raised to `alpha`:
/// `V = (V0^-1 + alpha/sigma^2 X'X)^-1`, `m = V (V0^-1 m0 + alpha/sigma^2 X'y)`.
pub fn subset_power_posterior(data: &RegressionData, alpha: f64, prior: &GaussianParams) -> Result<PosteriorParams> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("power {alpha} must be positive")));
    }
    if prior.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: prior.dim() });
    }
    let prior_prec = spd_inverse(prior.covariance().clone(), "prior covariance")?;
    let scale = alpha / data.sigma2;
    let xt = data.design.transpose();
    let precision = &prior_prec + (&xt * &data.design) * scale;
    let precision = (&precision + precision.transpose()) * 0.5;
    let cov = spd_inverse(precision, "posterior precision")?;
    let cov = (&cov + cov.transpose()) * 0.5;
    let rhs = &prior_prec * prior.mean() + (&xt * &data.response) * scale;
    let mean = &cov * rhs;
    GaussianParams::new(mean, cov)
}

/// Exact full-data posterior.
pub fn oracle_posterior(data: &RegressionData, prior: &GaussianParams) -> Result<PosteriorParams> {
    subset_power_posterior(data, 1.0, prior)
}

/// Random partition into `k` subsets whose sizes differ by at most one.
pub fn split(data: &RegressionData, k: usize, rng: &mut Rng) -> Result<Vec<RegressionData>> {
    let n = data.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("cannot split {n} rows into {k} subsets")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    Ok(chunk_bounds(n, k).map(|(lo, hi)| data.select(&idx[lo..hi])).collect())
}

/// `[lo, hi)` bounds of `k` contiguous chunks of `n` items, sizes within one.
pub fn chunk_bounds(n: usize, k: usize) -> impl Iterator<Item = (usize, usize)> {
    let (base, extra) = (n / k, n % k);
    (0..k).map(move |c| {
        let lo = c * base + c.min(extra);
        (lo, lo + base + usize::from(c < extra))
    })
}

/// Power posteriors of all subsets with `alpha_k = n / n_k`.
pub fn subset_posteriors(subsets: &[RegressionData], prior: &GaussianParams) -> Result<Vec<PosteriorParams>> {
    let n: usize = subsets.iter().map(RegressionData::len).sum();
    subsets
        .iter()
        .map(|s| subset_power_posterior(s, n as f64 / s.len() as f64, prior))
        .collect()
}

/// Draws `draws_per_subset` points from every subset posterior and returns
/// the free-support barycenter of the uniform empirical measures, with
/// `opts.support_size` atoms and uniform family weights.
pub fn wasp(posteriors: &[PosteriorParams], draws_per_subset: usize, opts: &SolverOptions, rng: &mut Rng) -> Result<DiscreteMeasure> {
    let draws = subset_draws(posteriors, draws_per_subset, rng)?;
    wasp_from_draws(draws, opts)
}

/// Empirical measures of `count` exact draws from each posterior.
pub fn subset_draws(posteriors: &[PosteriorParams], count: usize, rng: &mut Rng) -> Result<Vec<DiscreteMeasure>> {
    if posteriors.is_empty() {
        return Err(Error::Empty("no subset posteriors"));
    }
    posteriors
        .iter()
        .map(|post| DiscreteMeasure::uniform(gaussian::sample_with(post, count, rng)?))
        .collect()
}

/// Barycenter of already-sampled subset measures.
pub fn wasp_from_draws(draws: Vec<DiscreteMeasure>, opts: &SolverOptions) -> Result<DiscreteMeasure> {
    let family = WeightedFamily::uniform(draws)?;
    let state = barycenter::solve(&family, opts)?;
    state.measure()
}
