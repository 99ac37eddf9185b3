//! Synthetic benchmark data: two-glyph image sets and separated Gaussian blobs.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::io::LabeledImage;
use crate::rng::{self, Rng};

pub const GLYPH_SIZE: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Glyph {
    Square,
    Ring,
}

impl Glyph {
    pub fn label(self) -> &'static str {
        match self {
            Glyph::Square => "square",
            Glyph::Ring => "ring",
        }
    }
}

/// A jittered glyph on a `GLYPH_SIZE` square canvas: a filled square or a
/// hollow ring of random size and position, bright strokes over faint noise.
pub fn glyph_image(glyph: Glyph, rng: &mut Rng) -> GrayImage {
    let mid = (GLYPH_SIZE as f64 - 1.0) / 2.0;
    let (cr, cc) = (mid + rng.random_range(-3.0..3.0), mid + rng.random_range(-3.0..3.0));
    let half = rng.random_range(4.5..6.5);
    let radius = rng.random_range(6.0..8.0);
    let pixels = Array2::from_shape_fn((GLYPH_SIZE, GLYPH_SIZE), |(r, c)| {
        let (dr, dc) = (r as f64 - cr, c as f64 - cc);
        let inside = match glyph {
            Glyph::Square => dr.abs() <= half && dc.abs() <= half,
            Glyph::Ring => ((dr * dr + dc * dc).sqrt() - radius).abs() <= 1.0,
        };
        if inside {
            rng.random_range(0.8..=1.0)
        } else {
            rng.random_range(0.0..0.1)
        }
    });
    GrayImage::new(pixels).expect("intensities lie in [0, 1]")
}

/// `per_class` images of each glyph, alternating classes, named `img_NNNNN.csv`.
pub fn glyph_dataset(per_class: usize, seed: u64) -> Vec<LabeledImage> {
    let mut rng = rng::rng(seed);
    (0..2 * per_class)
        .map(|i| {
            let glyph = if i % 2 == 0 { Glyph::Square } else { Glyph::Ring };
            LabeledImage {
                name: format!("img_{i:05}.csv"),
                label: glyph.label().to_string(),
                image: glyph_image(glyph, &mut rng),
            }
        })
        .collect()
}

/// `n` points in `d` dimensions from `k` unit-variance Gaussian blobs
/// centered at `separation` times the first `k` basis vectors, in nearly
/// equal shares. Returns the points and their blob labels.
pub fn gaussian_blobs(n: usize, d: usize, k: usize, separation: f64, seed: u64) -> Result<(Array2<f64>, Vec<usize>)> {
    if k == 0 || k > d || n < k {
        return Err(Error::InvalidParameter(format!("cannot draw {n} points from {k} blobs in {d} dimensions")));
    }
    let mut rng = rng::rng(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut points = Array2::zeros((n, d));
    for (i, mut row) in points.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        row[labels[i]] += separation;
    }
    Ok((points, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::image_to_measure;

    #[test]
    fn glyph_foreground_is_recovered() {
        let mut rng = rng::rng(1);
        for glyph in [Glyph::Square, Glyph::Ring] {
            let img = glyph_image(glyph, &mut rng);
            let bright = img.pixels().iter().filter(|&&v| v >= 0.8).count();
            assert_eq!(image_to_measure(&img).unwrap().len(), bright);
        }
    }

    #[test]
    fn ring_is_hollow() {
        let img = glyph_image(Glyph::Ring, &mut rng::rng(2));
        let mu = image_to_measure(&img).unwrap();
        let center = mu.mean();
        let nearest = mu
            .support()
            .rows()
            .into_iter()
            .map(|r| ((r[0] - center[0]).powi(2) + (r[1] - center[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest > 3.0);
    }

    #[test]
    fn dataset_is_balanced_and_reproducible() {
        let a = glyph_dataset(5, 3);
        assert_eq!(a.len(), 10);
        assert_eq!(a.iter().filter(|x| x.label == "ring").count(), 5);
        let b = glyph_dataset(5, 3);
        assert_eq!(a[7].image, b[7].image);
    }

    #[test]
    fn blobs_are_centered_on_axes() {
        let (pts, labels) = gaussian_blobs(3000, 10, 3, 10.0, 4).unwrap();
        for c in 0..3 {
            let members: Vec<usize> = (0..3000).filter(|&i| labels[i] == c).collect();
            assert_eq!(members.len(), 1000);
            let mean: f64 = members.iter().map(|&i| pts[(i, c)]).sum::<f64>() / 1000.0;
            assert!((mean - 10.0).abs() < 0.15);
        }
        assert!(gaussian_blobs(10, 2, 3, 1.0, 0).is_err());
    }
}
