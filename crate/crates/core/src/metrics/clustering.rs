use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Co-occurrence counts of two labelings; rows follow the first labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    counts: Array2<u64>,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch(format!("labelings of length {} and {}", a.len(), b.len())));
        }
        if a.is_empty() {
            return Err(Error::Empty("labeling"));
        }
        let (ia, ra) = dense_ids(a);
        let (ib, rb) = dense_ids(b);
        let mut counts = Array2::zeros((ra, rb));
        for (&i, &j) in ia.iter().zip(&ib) {
            counts[(i, j)] += 1;
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn row_sums(&self) -> Array1<u64> {
        self.counts.sum_axis(Axis(1))
    }

    pub fn col_sums(&self) -> Array1<u64> {
        self.counts.sum_axis(Axis(0))
    }
}

fn pairs(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index. Two labelings that are both trivial in the same way
/// (one cluster each, or all singletons) score 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(a, b)?;
    let index: f64 = table.counts.iter().map(|&c| pairs(c)).sum();
    let sum_a: f64 = table.row_sums().iter().map(|&c| pairs(c)).sum();
    let sum_b: f64 = table.col_sums().iter().map(|&c| pairs(c)).sum();
    let total = pairs(table.total());
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &Array1<u64>, n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the arithmetic mean of the two entropies.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(a, b)?;
    let n = table.total() as f64;
    let (rows, cols) = (table.row_sums(), table.col_sums());
    let (ha, hb) = (entropy(&rows, n), entropy(&cols, n));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for ((i, j), &c) in table.counts.indexed_iter() {
        if c > 0 {
            let c = c as f64;
            mi += c / n * (c * n / (rows[i] as f64 * cols[j] as f64)).ln();
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

fn check_points(points: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
    if points.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} points but {} labels", points.nrows(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Empty("points"));
    }
    Ok(())
}

/// Mean silhouette width with Euclidean distances. Points in singleton
/// clusters, and points with `a = b = 0`, score 0.
pub fn silhouette(points: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    check_points(points, labels)?;
    let (ids, k) = dense_ids(labels);
    if k < 2 {
        return Err(Error::InvalidParameter("silhouette needs at least two clusters".into()));
    }
    let mut sizes = vec![0usize; k];
    for &c in &ids {
        sizes[c] += 1;
    }
    let n = ids.len();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = ids[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let xi = points.row(i);
            for j in 0..n {
                if j != i {
                    let d: f64 = xi.iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    sums[ids[j]] += d.sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Ratio of between- to within-cluster dispersion, each scaled by its
/// degrees of freedom. Undefined for one cluster, one point per cluster,
/// or zero within-cluster dispersion.
pub fn calinski_harabasz(points: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    check_points(points, labels)?;
    let (ids, k) = dense_ids(labels);
    let n = ids.len();
    if k < 2 || k >= n {
        return Err(Error::InvalidParameter(format!("Calinski-Harabasz undefined for {k} clusters on {n} points")));
    }
    let d = points.ncols();
    let mut centers = Array2::<f64>::zeros((k, d));
    let mut sizes = vec![0usize; k];
    for (row, &c) in points.rows().into_iter().zip(&ids) {
        centers.row_mut(c).scaled_add(1.0, &row);
        sizes[c] += 1;
    }
    for (mut row, &s) in centers.rows_mut().into_iter().zip(&sizes) {
        row /= s as f64;
    }
    let mean = points.mean_axis(Axis(0)).expect("nonempty");
    let between: f64 = centers
        .rows()
        .into_iter()
        .zip(&sizes)
        .map(|(c, &s)| s as f64 * (&c - &mean).mapv(|v| v * v).sum())
        .sum();
    let within: f64 = points
        .rows()
        .into_iter()
        .zip(&ids)
        .map(|(x, &c)| (&x - &centers.row(c)).mapv(|v| v * v).sum())
        .sum();
    if within == 0.0 {
        return Err(Error::InvalidParameter("zero within-cluster dispersion".into()));
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}
