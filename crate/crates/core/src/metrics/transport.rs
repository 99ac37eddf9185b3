use ndarray::Axis;
use rayon::prelude::*;
use serde::Serialize;

use crate::barycenter::objective;
use crate::error::{Error, Result};
use crate::gaussian::{sample_with, GaussianParams};
use crate::measures::{DiscreteMeasure, WeightedFamily};
use crate::ot::w2_distance;
use crate::rng;

pub const DEFAULT_SAMPLE_SIZE: usize = 100;
pub const DEFAULT_REPEATS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
}

impl MonteCarloEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

/// Monte-Carlo W2 between a Gaussian and a discrete measure: each repeat
/// compares `measure` with a fresh uniform sample of `sample_size` points.
pub fn semidiscrete_w2(
    oracle: &GaussianParams,
    measure: &DiscreteMeasure,
    sample_size: usize,
    repeats: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if oracle.dim() != measure.dim() {
        return Err(Error::DimensionMismatch { expected: measure.dim(), found: oracle.dim() });
    }
    if sample_size == 0 || repeats == 0 {
        return Err(Error::InvalidParameter("sample size and repeats must be positive".into()));
    }
    let values = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let pts = sample_with(oracle, sample_size, &mut rng::task_rng(seed, &[r as u64]))?;
            w2_distance(&DiscreteMeasure::uniform(pts)?, measure)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MonteCarloEstimate::from_values(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityCheck {
    pub gap: f64,
    pub bound: f64,
}

impl StabilityCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.gap <= self.bound + slack
    }
}

fn max_norm(m: &DiscreteMeasure) -> f64 {
    m.support()
        .map_axis(Axis(1), |r| r.dot(&r).sqrt())
        .fold(0.0, |a: f64, &b| a.max(b))
}

/// Objective gap of `candidate` between two families with the same weights,
/// alongside `4 R delta`: `R` bounds every support point's norm and `delta`
/// is the largest member-wise W2 distance.
pub fn stability_gap(a: &WeightedFamily, b: &WeightedFamily, candidate: &DiscreteMeasure) -> Result<StabilityCheck> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("families of size {} and {}", a.len(), b.len())));
    }
    if a.family_weights().iter().zip(b.family_weights()).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::InvalidParameter("families carry different weights".into()));
    }
    let gap = (objective(candidate, a)? - objective(candidate, b)?).abs();
    let radius = a
        .measures()
        .iter()
        .chain(b.measures())
        .chain(std::iter::once(candidate))
        .map(max_norm)
        .fold(0.0, f64::max);
    let delta = a
        .measures()
        .iter()
        .zip(b.measures())
        .map(|(x, y)| w2_distance(x, y))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(StabilityCheck { gap, bound: 4.0 * radius * delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dirac_against_standard_normal() {
        // W2^2 to a point at the origin is the mean squared norm, about 2.
        let g = GaussianParams::standard(&[0.0, 0.0]);
        let est = semidiscrete_w2(&g, &DiscreteMeasure::dirac(&[0.0, 0.0]).unwrap(), 100, 100, 1).unwrap();
        assert!((est.mean * est.mean - 2.0).abs() < 0.3);
        assert!(est.stderr > 0.0);
    }

    #[test]
    fn seeded_reproducibility() {
        let g = GaussianParams::standard(&[1.0]);
        let m = DiscreteMeasure::uniform(array![[0.0], [2.0]]).unwrap();
        let a = semidiscrete_w2(&g, &m, 20, 10, 4).unwrap();
        let b = semidiscrete_w2(&g, &m, 20, 10, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch() {
        let g = GaussianParams::standard(&[0.0, 0.0]);
        assert!(semidiscrete_w2(&g, &DiscreteMeasure::dirac(&[0.0]).unwrap(), 10, 2, 0).is_err());
    }

    #[test]
    fn estimate_of_constant_values() {
        let e = MonteCarloEstimate::from_values(&[2.0, 2.0, 2.0]);
        assert_eq!(e, MonteCarloEstimate { mean: 2.0, stderr: 0.0 });
    }

    #[test]
    fn identical_families_have_zero_gap() {
        let f = WeightedFamily::uniform(vec![
            DiscreteMeasure::uniform(array![[0.0, 1.0], [2.0, 0.0]]).unwrap(),
            DiscreteMeasure::dirac(&[1.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let s = stability_gap(&f, &f, &DiscreteMeasure::dirac(&[0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(s.gap, 0.0);
        assert_eq!(s.bound, 0.0);
    }

    #[test]
    fn perturbed_dirac_pair() {
        let (a, t, c) = ([1.0, 0.0], [0.3, -0.4], [2.0, 1.0]);
        let fa = WeightedFamily::uniform(vec![DiscreteMeasure::dirac(&a).unwrap()]).unwrap();
        let fb = WeightedFamily::uniform(vec![DiscreteMeasure::dirac(&[a[0] + t[0], a[1] + t[1]]).unwrap()]).unwrap();
        let s = stability_gap(&fa, &fb, &DiscreteMeasure::dirac(&c).unwrap()).unwrap();
        let d2 = |p: [f64; 2]| (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
        let expected = (d2(a) - d2([a[0] + t[0], a[1] + t[1]])).abs();
        assert!((s.gap - expected).abs() < 1e-12);
        let radius = 5f64.sqrt();
        assert!((s.bound - 4.0 * radius * 0.5).abs() < 1e-12);
        assert!(s.holds(1e-9));
    }

    #[test]
    fn mismatched_families() {
        let one = WeightedFamily::uniform(vec![DiscreteMeasure::dirac(&[0.0]).unwrap()]).unwrap();
        let two = WeightedFamily::uniform(vec![DiscreteMeasure::dirac(&[0.0]).unwrap(); 2]).unwrap();
        assert!(stability_gap(&one, &two, &DiscreteMeasure::dirac(&[0.0]).unwrap()).is_err());
    }
}
