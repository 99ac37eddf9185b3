//! End-to-end experiments: the Gaussian benchmark, WASP posterior
//! aggregation, barycenter-prototype classification and distributed vector
//! quantization (DVQ). Every random draw comes from a stream derived from
//! the master seed and fixed task counters, so results do not depend on
//! thread scheduling.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::barycenter::{self, SolverOptions};
use crate::bayes;
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianParams};
use crate::imaging;
use crate::io::LabeledImage;
use crate::kmeans;
use crate::measures::{DiscreteMeasure, WeightedFamily};
use crate::metrics::{self, transport::semidiscrete_w2};
use crate::rng;

/// Solver settings shared by the pipelines; the support size is set per run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub step_size: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { step_size: 0.5, tolerance: 1e-6, max_iterations: 200 }
    }
}

impl SolverSettings {
    pub fn options(&self, support_size: usize, seed: u64) -> SolverOptions {
        SolverOptions::new(support_size)
            .with_step_size(self.step_size)
            .with_tolerance(self.tolerance)
            .with_max_iterations(self.max_iterations)
            .with_seed(seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.options(1, 0).validate()
    }
}

/// Weighted mean and (biased) covariance of a discrete measure.
pub fn measure_moments(measure: &DiscreteMeasure) -> (DVector<f64>, DMatrix<f64>) {
    let d = measure.dim();
    let mean = DVector::from_vec(measure.mean().to_vec());
    let mut cov = DMatrix::zeros(d, d);
    for (row, &w) in measure.support().rows().into_iter().zip(measure.weights()) {
        let x = DVector::from_iterator(d, row.iter().copied()) - &mean;
        cov += &x * x.transpose() * w;
    }
    (mean, (&cov + cov.transpose()) * 0.5)
}

fn positive_list(name: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() || values.contains(&0) {
        return Err(Error::InvalidParameter(format!("{name} must be a nonempty list of positive integers")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussBenchConfig {
    pub repeats: usize,
    pub atom_grid: Vec<usize>,
    pub samples_per_component: usize,
    pub mc_sample_size: usize,
    pub mc_repeats: usize,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for GaussBenchConfig {
    fn default() -> Self {
        Self {
            repeats: 20,
            atom_grid: vec![10, 50, 150],
            samples_per_component: 100,
            mc_sample_size: metrics::transport::DEFAULT_SAMPLE_SIZE,
            mc_repeats: metrics::transport::DEFAULT_REPEATS,
            seed: 0,
            solver: SolverSettings::default(),
        }
    }
}

impl GaussBenchConfig {
    pub fn validate(&self) -> Result<()> {
        positive_list("atom_grid", &self.atom_grid)?;
        if self.repeats == 0 || self.samples_per_component == 0 || self.mc_sample_size == 0 || self.mc_repeats == 0 {
            return Err(Error::InvalidParameter("repeats and sample sizes must be positive".into()));
        }
        let pooled = 4 * self.samples_per_component;
        if let Some(&m) = self.atom_grid.iter().find(|&&m| m > pooled) {
            return Err(Error::InvalidParameter(format!("atom count {m} exceeds the {pooled} pooled samples")));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussBenchRecord {
    pub rep: usize,
    pub n_atoms: usize,
    pub w2_mc: f64,
    pub w2_mc_stderr: f64,
    pub mean_err: f64,
    pub bures_cov_err: f64,
    pub iterations: usize,
}

/// Per repetition: four random Gaussians, their exact barycenter, an
/// empirical sample from each, and the free-support barycenter of the
/// samples at every grid size, scored against the exact barycenter.
pub fn gauss_bench(cfg: &GaussBenchConfig) -> Result<Vec<GaussBenchRecord>> {
    cfg.validate()?;
    let seed = cfg.seed;
    let per_rep = (0..cfg.repeats)
        .into_par_iter()
        .map(|rep| {
            let r = rep as u64;
            let comps = gaussian::benchmark_components(&mut rng::task_rng(seed, &[0, r]))?;
            let pi = vec![0.25; comps.len()];
            let oracle = gaussian::gaussian_barycenter(&comps, &pi, 1e-12, 10_000)?;
            let mut draw_rng = rng::task_rng(seed, &[1, r]);
            let samples = comps
                .iter()
                .map(|g| DiscreteMeasure::uniform(gaussian::sample_with(g, cfg.samples_per_component, &mut draw_rng)?))
                .collect::<Result<Vec<_>>>()?;
            let family = WeightedFamily::uniform(samples)?;
            cfg.atom_grid
                .iter()
                .map(|&m| {
                    let opts = cfg.solver.options(m, rng::task_seed(seed, &[2, r, m as u64]));
                    let state = barycenter::solve(&family, &opts)?;
                    let bary = state.measure()?;
                    let mc = semidiscrete_w2(
                        &oracle,
                        &bary,
                        cfg.mc_sample_size,
                        cfg.mc_repeats,
                        rng::task_seed(seed, &[3, r, m as u64]),
                    )?;
                    let (mean, cov) = measure_moments(&bary);
                    Ok(GaussBenchRecord {
                        rep,
                        n_atoms: m,
                        w2_mc: mc.mean,
                        w2_mc_stderr: mc.stderr,
                        mean_err: (mean - oracle.mean()).norm(),
                        bures_cov_err: gaussian::bures_covariance_sq(&cov, oracle.covariance()).sqrt(),
                        iterations: state.iteration,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaspConfig {
    pub n: usize,
    pub k_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub repeats: usize,
    pub draws_per_subset: usize,
    pub mc_sample_size: usize,
    pub mc_repeats: usize,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for WaspConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            k_list: vec![2, 5, 10],
            m_list: vec![10, 100, 200],
            repeats: 10,
            draws_per_subset: 200,
            mc_sample_size: metrics::transport::DEFAULT_SAMPLE_SIZE,
            mc_repeats: metrics::transport::DEFAULT_REPEATS,
            seed: 0,
            solver: SolverSettings::default(),
        }
    }
}

impl WaspConfig {
    pub fn validate(&self) -> Result<()> {
        positive_list("K_list", &self.k_list)?;
        positive_list("m_list", &self.m_list)?;
        if self.repeats == 0 || self.draws_per_subset == 0 || self.mc_sample_size == 0 || self.mc_repeats == 0 {
            return Err(Error::InvalidParameter("repeats and sample sizes must be positive".into()));
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| 2 * k > self.n) {
            return Err(Error::InvalidParameter(format!("K = {k} leaves fewer than 2 rows per subset of n = {}", self.n)));
        }
        for &k in &self.k_list {
            if let Some(&m) = self.m_list.iter().find(|&&m| m > k * self.draws_per_subset) {
                return Err(Error::InvalidParameter(format!("m = {m} exceeds the {} pooled draws at K = {k}", k * self.draws_per_subset)));
            }
        }
        self.solver.validate()
    }
}

pub const METHOD_WASP: &str = "wasp";
pub const METHOD_RAW_SUBSET: &str = "raw_subset";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaspRecord {
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub rep: usize,
    pub method: String,
    pub w2_to_oracle: f64,
    pub mean_err: f64,
    pub cov_err: f64,
}

fn score_posterior(measure: &DiscreteMeasure, oracle: &GaussianParams, cfg: &WaspConfig, mc_seed: u64) -> Result<(f64, f64, f64)> {
    let mc = semidiscrete_w2(oracle, measure, cfg.mc_sample_size, cfg.mc_repeats, mc_seed)?;
    let (mean, cov) = measure_moments(measure);
    Ok((mc.mean, (mean - oracle.mean()).norm(), (cov - oracle.covariance()).norm()))
}

/// Per repetition: regression data, the exact posterior, and for every K a
/// random split into subset power posteriors whose draws are aggregated at
/// every support size m. Each (rep, K) also scores the raw draws of the
/// first subset posterior as a baseline (`method = raw_subset`).
/// Covariance errors are Frobenius norms.
pub fn wasp_experiment(cfg: &WaspConfig) -> Result<Vec<WaspRecord>> {
    cfg.validate()?;
    let seed = cfg.seed;
    let per_rep = (0..cfg.repeats)
        .into_par_iter()
        .map(|rep| {
            let r = rep as u64;
            let data = bayes::generate_data(cfg.n, &[1.0, 1.0], 1.0, &mut rng::task_rng(seed, &[0, r]))?;
            let prior = bayes::default_prior(2);
            let oracle = bayes::oracle_posterior(&data, &prior)?;
            let mut out = Vec::new();
            for &k in &cfg.k_list {
                let kk = k as u64;
                let subsets = bayes::split(&data, k, &mut rng::task_rng(seed, &[1, r, kk]))?;
                let posts = bayes::subset_posteriors(&subsets, &prior)?;
                let draws = bayes::subset_draws(&posts, cfg.draws_per_subset, &mut rng::task_rng(seed, &[2, r, kk]))?;

                let (w2, mean_err, cov_err) = score_posterior(&draws[0], &oracle, cfg, rng::task_seed(seed, &[4, r, kk]))?;
                out.push(WaspRecord {
                    k,
                    m: cfg.draws_per_subset,
                    seed,
                    rep,
                    method: METHOD_RAW_SUBSET.into(),
                    w2_to_oracle: w2,
                    mean_err,
                    cov_err,
                });
                for &m in &cfg.m_list {
                    let mm = m as u64;
                    let opts = cfg.solver.options(m, rng::task_seed(seed, &[3, r, kk, mm]));
                    let bary = bayes::wasp_from_draws(draws.clone(), &opts)?;
                    let (w2, mean_err, cov_err) = score_posterior(&bary, &oracle, cfg, rng::task_seed(seed, &[5, r, kk, mm]))?;
                    out.push(WaspRecord {
                        k,
                        m,
                        seed,
                        rep,
                        method: METHOD_WASP.into(),
                        w2_to_oracle: w2,
                        mean_err,
                        cov_err,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub m_list: Vec<usize>,
    pub bins: usize,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { m_list: vec![10, 20, 40, 80], bins: imaging::DEFAULT_BINS, seed: 0, solver: SolverSettings::default() }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        positive_list("m_list", &self.m_list)?;
        if self.bins < 2 {
            return Err(Error::InvalidParameter("bins must be at least 2".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyRecord {
    pub m: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn to_measures(images: &[LabeledImage], bins: usize) -> Result<Vec<DiscreteMeasure>> {
    images
        .par_iter()
        .map(|item| {
            imaging::image_to_measure_with_bins(&item.image, bins)
                .map_err(|e| Error::InvalidParameter(format!("image {}: {e}", item.name)))
        })
        .collect()
}

/// Class barycenters with `m` atoms of the training images, per `m`.
pub fn class_prototypes(train: &[LabeledImage], m: usize, cfg: &ClassifyConfig) -> Result<BTreeMap<String, DiscreteMeasure>> {
    let measures = to_measures(train, cfg.bins)?;
    prototypes_from_measures(train, &measures, m, cfg)
}

fn prototypes_from_measures(
    train: &[LabeledImage],
    measures: &[DiscreteMeasure],
    m: usize,
    cfg: &ClassifyConfig,
) -> Result<BTreeMap<String, DiscreteMeasure>> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut classes: BTreeMap<String, Vec<DiscreteMeasure>> = BTreeMap::new();
    for (item, mu) in train.iter().zip(measures) {
        classes.entry(item.label.clone()).or_default().push(mu.clone());
    }
    classes
        .into_iter()
        .enumerate()
        .map(|(c, (label, members))| {
            let family = WeightedFamily::uniform(members)?;
            let opts = cfg.solver.options(m, rng::task_seed(cfg.seed, &[c as u64, m as u64]));
            let proto = barycenter::solve(&family, &opts)?.measure()?;
            Ok((label, proto))
        })
        .collect()
}

/// Nearest-barycenter classification of `test` at every support size.
pub fn classify_experiment(train: &[LabeledImage], test: &[LabeledImage], cfg: &ClassifyConfig) -> Result<Vec<ClassifyRecord>> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let train_measures = to_measures(train, cfg.bins)?;
    let test_measures = to_measures(test, cfg.bins)?;
    let truth: Vec<&str> = test.iter().map(|t| t.label.as_str()).collect();
    cfg.m_list
        .iter()
        .map(|&m| {
            let protos = prototypes_from_measures(train, &train_measures, m, cfg)?;
            let predicted = metrics::classify_nearest_prototype(&test_measures, &protos)?;
            let predicted: Vec<&str> = predicted.iter().map(String::as_str).collect();
            let report = metrics::classification_report(&predicted, &truth)?;
            Ok(ClassifyRecord { m, accuracy: report.accuracy, precision: report.precision, recall: report.recall, f1: report.f1 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvqConfig {
    pub k_list: Vec<usize>,
    pub s_list: Vec<usize>,
    pub summary_fraction: f64,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for DvqConfig {
    fn default() -> Self {
        Self { k_list: vec![3], s_list: vec![2, 5], summary_fraction: 0.1, seed: 0, solver: SolverSettings::default() }
    }
}

impl DvqConfig {
    pub fn validate(&self) -> Result<()> {
        positive_list("k_list", &self.k_list)?;
        positive_list("S_list", &self.s_list)?;
        if !(self.summary_fraction > 0.0 && self.summary_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!("summary fraction {} outside (0, 1]", self.summary_fraction)));
        }
        self.solver.validate()
    }
}

pub const METHOD_DVQ: &str = "dvq";
pub const METHOD_KMEANS: &str = "kmeans";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DvqRecord {
    pub method: String,
    pub k: usize,
    #[serde(rename = "S")]
    pub s: Option<usize>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub silhouette: Option<f64>,
    pub calinski_harabasz: Option<f64>,
}

/// Each subset compressed by k-means to `max(1, round(fraction * n_s))`
/// centers weighted by cluster mass.
pub fn summarize_subset(points: ArrayView2<'_, f64>, fraction: f64, seed: u64) -> Result<DiscreteMeasure> {
    let k = ((fraction * points.nrows() as f64).round() as usize).clamp(1, points.nrows());
    let fit = kmeans::kmeans(points, None, k, seed, kmeans::DEFAULT_MAX_ITER)?;
    let masses = fit.cluster_masses(None);
    let keep: Vec<usize> = (0..k).filter(|&c| masses[c] > 0.0).collect();
    let centers = fit.centers.select(ndarray::Axis(0), &keep);
    let weights: Array1<f64> = keep.iter().map(|&c| masses[c]).collect();
    let total = weights.sum();
    DiscreteMeasure::new(centers, Some(weights / total))
}

/// Weighted summaries of a random `s`-way split.
pub fn dvq_summaries(points: ArrayView2<'_, f64>, s: usize, fraction: f64, seed: u64) -> Result<Vec<DiscreteMeasure>> {
    let n = points.nrows();
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!("cannot split {n} points into {s} subsets")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::task_rng(seed, &[0, s as u64]));
    let bounds: Vec<(usize, usize)> = bayes::chunk_bounds(n, s).collect();
    bounds
        .par_iter()
        .enumerate()
        .map(|(j, &(lo, hi))| {
            let subset = points.select(ndarray::Axis(0), &idx[lo..hi]);
            summarize_subset(subset.view(), fraction, rng::task_seed(seed, &[1, s as u64, j as u64]))
        })
        .collect()
}

/// DVQ centroids: the `k`-atom barycenter of the subset summaries.
pub fn dvq_centroids(summaries: Vec<DiscreteMeasure>, k: usize, solver: &SolverSettings, seed: u64) -> Result<Array2<f64>> {
    let family = WeightedFamily::uniform(summaries)?;
    if k > family.total_atoms() {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {} summary atoms", family.total_atoms())));
    }
    Ok(barycenter::solve(&family, &solver.options(k, seed))?.support)
}

fn score_clustering(points: ArrayView2<'_, f64>, labels: &[usize], truth: Option<&[usize]>) -> Result<(Option<f64>, Option<f64>, Option<f64>, Option<f64>)> {
    let (ari, nmi) = match truth {
        Some(t) => (Some(metrics::ari(t, labels)?), Some(metrics::nmi(t, labels)?)),
        None => (None, None),
    };
    Ok((ari, nmi, metrics::silhouette(points, labels).ok(), metrics::calinski_harabasz(points, labels).ok()))
}

/// DVQ for every (k, S) and a full-data k-means baseline per k. Silhouette
/// and Calinski-Harabasz are left empty where undefined (for example k = 1).
pub fn dvq_experiment(points: ArrayView2<'_, f64>, truth: Option<&[usize]>, cfg: &DvqConfig) -> Result<Vec<DvqRecord>> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.len() != points.nrows() {
            return Err(Error::ShapeMismatch(format!("{} labels for {} points", t.len(), points.nrows())));
        }
    }
    let mut out = Vec::new();
    for &s in &cfg.s_list {
        let summaries = dvq_summaries(points, s, cfg.summary_fraction, cfg.seed)?;
        for &k in &cfg.k_list {
            let centroids = dvq_centroids(summaries.clone(), k, &cfg.solver, rng::task_seed(cfg.seed, &[2, s as u64, k as u64]))?;
            let labels = kmeans::assign_nearest(points, centroids.view());
            let (ari, nmi, silhouette, calinski_harabasz) = score_clustering(points, &labels, truth)?;
            out.push(DvqRecord { method: METHOD_DVQ.into(), k, s: Some(s), ari, nmi, silhouette, calinski_harabasz });
        }
    }
    for &k in &cfg.k_list {
        let fit = kmeans::kmeans(points, None, k, rng::task_seed(cfg.seed, &[3, k as u64]), kmeans::DEFAULT_MAX_ITER)?;
        let (ari, nmi, silhouette, calinski_harabasz) = score_clustering(points, &fit.assignments, truth)?;
        out.push(DvqRecord { method: METHOD_KMEANS.into(), k, s: None, ari, nmi, silhouette, calinski_harabasz });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use ndarray::array;

    #[test]
    fn moments_of_two_atoms() {
        let m = DiscreteMeasure::new(array![[0.0, 0.0], [2.0, 4.0]], Some(array![0.5, 0.5])).unwrap();
        let (mean, cov) = measure_moments(&m);
        assert_eq!(mean, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
    }

    #[test]
    fn summaries_carry_cluster_masses() {
        let pts = array![[0.0], [0.1], [0.2], [10.0], [10.1], [10.2], [10.3], [10.4], [20.0], [20.2]];
        let s = summarize_subset(pts.view(), 0.3, 1).unwrap();
        assert_eq!(s.len(), 3);
        let mut w: Vec<f64> = s.weights().to_vec();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - 0.2).abs() < 1e-12 && (w[1] - 0.3).abs() < 1e-12 && (w[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dvq_k_exceeding_summary_is_rejected() {
        let (pts, _) = synthetic::gaussian_blobs(40, 3, 2, 5.0, 1).unwrap();
        let summaries = dvq_summaries(pts.view(), 2, 0.1, 0).unwrap();
        assert!(dvq_centroids(summaries, 9, &SolverSettings::default(), 0).is_err());
    }

    #[test]
    fn dvq_single_cluster_leaves_indices_empty() {
        let (pts, truth) = synthetic::gaussian_blobs(60, 3, 3, 8.0, 2).unwrap();
        let cfg = DvqConfig { k_list: vec![1], s_list: vec![2], ..Default::default() };
        let recs = dvq_experiment(pts.view(), Some(&truth), &cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.silhouette.is_none() && r.calinski_harabasz.is_none()));
        assert!(recs.iter().all(|r| r.ari == Some(0.0)));
    }

    #[test]
    fn single_class_training_predicts_that_class() {
        let data = synthetic::glyph_dataset(3, 5);
        let train: Vec<LabeledImage> = data.iter().filter(|x| x.label == "ring").cloned().collect();
        let cfg = ClassifyConfig { m_list: vec![5], ..Default::default() };
        let recs = classify_experiment(&train, &data, &cfg).unwrap();
        assert_eq!(recs[0].accuracy, 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(GaussBenchConfig { atom_grid: vec![], ..Default::default() }.validate().is_err());
        assert!(GaussBenchConfig { atom_grid: vec![500], ..Default::default() }.validate().is_err());
        assert!(WaspConfig { k_list: vec![0], ..Default::default() }.validate().is_err());
        assert!(DvqConfig { summary_fraction: 0.0, ..Default::default() }.validate().is_err());
        let bad_solver = SolverSettings { step_size: 0.7, ..Default::default() };
        assert!(ClassifyConfig { solver: bad_solver, ..Default::default() }.validate().is_err());
        assert!(WaspConfig::default().validate().is_ok());
    }

    #[test]
    fn small_gauss_bench_is_reproducible() {
        let cfg = GaussBenchConfig {
            repeats: 2,
            atom_grid: vec![5],
            samples_per_component: 20,
            mc_sample_size: 10,
            mc_repeats: 3,
            seed: 7,
            ..Default::default()
        };
        let a = gauss_bench(&cfg).unwrap();
        let b = gauss_bench(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].rep, a[1].rep), (0, 1));
    }
}
