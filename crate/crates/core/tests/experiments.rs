use nalgebra::{DMatrix, DVector};

use wbary::barycenter::SolverOptions;
use wbary::bayes;
use wbary::gaussian::{self, GaussianParams};
use wbary::imaging;
use wbary::kmeans;
use wbary::measures::DiscreteMeasure;
use wbary::metrics::{self, MonteCarloEstimate};
use wbary::ot::w2_distance;
use wbary::pipelines::measure_moments;
use wbary::rng;
use wbary::synthetic;

fn quantize(oracle: &GaussianParams, draws: usize, m: usize, seed: u64) -> DiscreteMeasure {
    let pts = gaussian::sample(oracle, draws, seed).unwrap();
    let fit = kmeans::kmeans(pts.view(), None, m, seed, kmeans::DEFAULT_MAX_ITER).unwrap();
    let masses = fit.cluster_masses(None);
    DiscreteMeasure::new(fit.centers, Some(&masses / masses.sum())).unwrap()
}

#[test]
fn semidiscrete_matches_independent_estimate() {
    let oracle = GaussianParams::standard(&[0.0, 0.0]);
    let reference = DiscreteMeasure::uniform(gaussian::sample(&oracle, 2000, 1).unwrap()).unwrap();
    let est = metrics::semidiscrete_w2(&oracle, &reference, 100, 100, 2).unwrap();

    let values: Vec<f64> = (0..100)
        .map(|r| {
            let s = DiscreteMeasure::uniform(gaussian::sample_with(&oracle, 100, &mut rng::task_rng(4, &[r])).unwrap()).unwrap();
            w2_distance(&s, &reference).unwrap()
        })
        .collect();
    let base = MonteCarloEstimate::from_values(&values);
    let sigma = (est.stderr.powi(2) + base.stderr.powi(2)).sqrt();
    assert!((est.mean - base.mean).abs() <= 2.0 * sigma, "{est:?} vs {base:?}");
}

#[test]
fn semidiscrete_error_falls_with_quantization_size() {
    let oracle = GaussianParams::standard(&[1.0, -1.0]);
    let coarse = metrics::semidiscrete_w2(&oracle, &quantize(&oracle, 2000, 5, 7), 100, 100, 8).unwrap();
    let fine = metrics::semidiscrete_w2(&oracle, &quantize(&oracle, 2000, 50, 7), 100, 100, 8).unwrap();
    assert!(fine.mean < coarse.mean + 2.0 * fine.stderr.max(coarse.stderr), "{fine:?} vs {coarse:?}");
    assert!(fine.mean < coarse.mean);
}

#[test]
fn wasp_single_subset_improves_with_support_size() {
    let data = bayes::generate_data_seeded(2000, &[1.0, 1.0], 1.0, 21).unwrap();
    let prior = bayes::default_prior(2);
    let post = bayes::oracle_posterior(&data, &prior).unwrap();
    let draws = bayes::subset_draws(&[post.clone()], 200, &mut rng::rng(22)).unwrap();
    let err = |m: usize| {
        let w = bayes::wasp_from_draws(draws.clone(), &SolverOptions::new(m).with_seed(1)).unwrap();
        metrics::semidiscrete_w2(&post, &w, 100, 100, 23).unwrap().mean
    };
    assert!(err(100) < err(10));
}

#[test]
fn wasp_of_identical_posteriors_quantizes_the_common_gaussian() {
    let common = GaussianParams::new(DVector::from_vec(vec![1.0, -2.0]), DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.02])).unwrap();
    let out = bayes::wasp(&vec![common.clone(); 4], 200, &SolverOptions::new(100).with_seed(3), &mut rng::rng(5)).unwrap();
    assert_eq!(out.len(), 100);
    let (mean, cov) = measure_moments(&out);
    assert!((mean - common.mean()).norm() < 0.03);
    assert!((cov - common.covariance()).norm() < 0.25 * common.covariance().norm());
}

#[test]
fn wasp_mean_tracks_oracle_posterior() {
    let data = bayes::generate_data_seeded(2000, &[1.0, 1.0], 1.0, 31).unwrap();
    let prior = bayes::default_prior(2);
    let oracle = bayes::oracle_posterior(&data, &prior).unwrap();
    let subsets = bayes::split(&data, 5, &mut rng::rng(32)).unwrap();
    let posts = bayes::subset_posteriors(&subsets, &prior).unwrap();
    let out = bayes::wasp(&posts, 200, &SolverOptions::new(100).with_seed(33), &mut rng::rng(34)).unwrap();
    let (mean, _) = measure_moments(&out);
    for k in 0..2 {
        let sd = oracle.covariance()[(k, k)].sqrt();
        assert!((mean[k] - oracle.mean()[k]).abs() <= 3.0 * sd, "coordinate {k}");
    }
}

#[test]
fn wasp_with_one_subset_recovers_posterior_moments() {
    let data = bayes::generate_data_seeded(1000, &[1.0, 1.0], 1.0, 41).unwrap();
    let prior = bayes::default_prior(2);
    let oracle = bayes::oracle_posterior(&data, &prior).unwrap();
    let posts = bayes::subset_posteriors(&[data], &prior).unwrap();
    assert_eq!(posts[0], oracle);
    let out = bayes::wasp(&posts, 4000, &SolverOptions::new(400).with_seed(42), &mut rng::rng(43)).unwrap();
    let (mean, cov) = measure_moments(&out);
    for k in 0..2 {
        let sd = oracle.covariance()[(k, k)].sqrt();
        assert!((mean[k] - oracle.mean()[k]).abs() <= 0.1 * sd);
    }
    assert!((cov - oracle.covariance()).norm() < 0.15 * oracle.covariance().norm());
}

#[test]
fn glyph_images_become_foreground_measures() {
    for item in synthetic::glyph_dataset(10, 51) {
        let mu = imaging::image_to_measure(&item.image).unwrap();
        let bright = item.image.pixels().iter().filter(|&&v| v >= 0.8).count();
        assert_eq!(mu.len(), bright, "{}", item.name);
    }
}

#[test]
fn gaussian_barycenter_of_one_is_itself() {
    let g = GaussianParams::new(DVector::from_vec(vec![0.5, 1.0]), DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
    let b = gaussian::gaussian_barycenter(std::slice::from_ref(&g), &[1.0], 1e-12, 100).unwrap();
    assert!((b.covariance() - g.covariance()).norm() < 1e-12);
    assert_eq!(b.mean(), g.mean());
}
