//! Grayscale images as empirical measures on their foreground pixels.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

pub const DEFAULT_BINS: usize = 256;

/// Intensities in `[0, 1]`, indexed `(row, col)` with rows increasing downward.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Array2<f64>,
}

impl GrayImage {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::Empty("image"));
        }
        for ((r, c), &v) in pixels.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("intensity {v} at ({r}, {c}) outside [0, 1]")));
            }
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> ArrayView2<'_, f64> {
        self.pixels.view()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }
}

// Bins are right-closed, (b/bins, (b+1)/bins], with 0 in the first bin, so
// "bin index > t" and "intensity > (t+1)/bins" pick the same pixels.
fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64).ceil() as usize).saturating_sub(1).min(bins - 1)
}

/// Otsu threshold over a `bins`-level histogram. The returned value is the
/// upper edge of the last background bin; foreground is strictly above it.
pub fn otsu_threshold(img: &GrayImage, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {bins}")));
    }
    let mut hist = vec![0u64; bins];
    for &v in img.pixels.iter() {
        hist[bin_of(v, bins)] += 1;
    }
    let total: u64 = hist.iter().sum();
    let total_sum: f64 = hist.iter().enumerate().map(|(b, &c)| b as f64 * c as f64).sum();

    let (mut n0, mut s0) = (0u64, 0.0);
    let mut best: Option<(usize, f64)> = None;
    for (t, &count) in hist.iter().enumerate().take(bins - 1) {
        n0 += count;
        s0 += t as f64 * count as f64;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let (w0, w1) = (n0 as f64, n1 as f64);
        let diff = s0 / w0 - (total_sum - s0) / w1;
        let score = w0 * w1 * diff * diff;
        if best.map_or(true, |(_, b)| score > b * (1.0 + 1e-12)) {
            best = Some((t, score));
        }
    }
    best.map(|(t, _)| (t + 1) as f64 / bins as f64)
        .ok_or_else(|| Error::InvalidParameter("image has a single intensity level, no threshold separates it".into()))
}

/// Uniform measure on the `(row, col)` coordinates of pixels strictly above `threshold`.
pub fn foreground_measure(img: &GrayImage, threshold: f64) -> Result<DiscreteMeasure> {
    let coords: Vec<f64> = img
        .pixels
        .indexed_iter()
        .filter(|(_, &v)| v > threshold)
        .flat_map(|((r, c), _)| [r as f64, c as f64])
        .collect();
    if coords.is_empty() {
        return Err(Error::Empty("foreground"));
    }
    let n = coords.len() / 2;
    DiscreteMeasure::uniform(Array2::from_shape_vec((n, 2), coords).expect("two coordinates per pixel"))
}

/// Otsu-thresholded foreground measure with the default 256 bins.
pub fn image_to_measure(img: &GrayImage) -> Result<DiscreteMeasure> {
    image_to_measure_with_bins(img, DEFAULT_BINS)
}

pub fn image_to_measure_with_bins(img: &GrayImage, bins: usize) -> Result<DiscreteMeasure> {
    foreground_measure(img, otsu_threshold(img, bins)?)
}
