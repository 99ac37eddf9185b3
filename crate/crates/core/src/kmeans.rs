//! Weighted Lloyd's k-means with k-means++ seeding.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Default cap on Lloyd iterations.
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// `k x d` cluster centers.
    pub centers: Array2<f64>,
    /// Cluster index of every input point.
    pub assignments: Vec<usize>,
    /// Weighted sum of squared distances to assigned centers.
    pub inertia: f64,
    /// Inertia after each center update.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Fewer distinct points than `k`; some centers coincide.
    pub degenerate: bool,
}

impl KMeansResult {
    /// Total input weight landing in each cluster.
    pub fn cluster_masses(&self, weights: Option<ArrayView1<'_, f64>>) -> Array1<f64> {
        let mut mass = Array1::zeros(self.centers.nrows());
        for (p, &c) in self.assignments.iter().enumerate() {
            mass[c] += weights.map_or(1.0, |w| w[p]);
        }
        mass
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest center; ties go to the lower index.
fn nearest(point: ArrayView1<'_, f64>, centers: ArrayView2<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.outer_iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Assigns each point to its nearest center.
pub fn assign_nearest(points: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>) -> Vec<usize> {
    points.outer_iter().map(|p| nearest(p, centers).0).collect()
}

fn sample_index(rng: &mut Rng, weights: &[f64], total: f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// k-means++: first center drawn proportional to weight, then each next
/// center proportional to `weight * D^2`. Returns the centers and whether
/// the `D^2` mass ran out before `k` centers were placed.
fn plus_plus(points: ArrayView2<'_, f64>, weights: &[f64], k: usize, rng: &mut Rng) -> (Array2<f64>, bool) {
    let (n, d) = points.dim();
    let mut centers = Array2::zeros((k, d));
    let total: f64 = weights.iter().sum();
    let first = sample_index(rng, weights, total);
    centers.row_mut(0).assign(&points.row(first));

    let mut closest: Vec<f64> = (0..n).map(|p| sq_dist(points.row(p), points.row(first))).collect();
    let mut degenerate = false;
    let mut score = vec![0.0; n];
    for c in 1..k {
        for p in 0..n {
            score[p] = weights[p] * closest[p];
        }
        let sum: f64 = score.iter().sum();
        let pick = if sum > 0.0 {
            sample_index(rng, &score, sum)
        } else {
            degenerate = true;
            sample_index(rng, weights, total)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for p in 0..n {
            closest[p] = closest[p].min(sq_dist(points.row(p), points.row(pick)));
        }
    }
    (centers, degenerate)
}

fn inertia(points: ArrayView2<'_, f64>, weights: &[f64], centers: ArrayView2<'_, f64>, assign: &[usize]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(p, &c)| weights[p] * sq_dist(points.row(p), centers.row(c)))
        .sum()
}

/// Gives every empty cluster the point farthest from its current center,
/// taken from a cluster that keeps at least one member.
fn repair_empty(points: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>, assign: &mut [usize], k: usize) {
    let mut counts = vec![0usize; k];
    for &c in assign.iter() {
        counts[c] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (p, &c) in assign.iter().enumerate() {
            if counts[c] <= 1 {
                continue;
            }
            let d = sq_dist(points.row(p), centers.row(c));
            if d > 0.0 && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((p, d));
            }
        }
        if let Some((p, _)) = best {
            counts[assign[p]] -= 1;
            assign[p] = empty;
            counts[empty] = 1;
        }
    }
}

/// Weighted means of the assigned points; clusters left empty keep their center.
fn update_centers(points: ArrayView2<'_, f64>, weights: &[f64], assign: &[usize], centers: &mut Array2<f64>) {
    let (k, d) = centers.dim();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut mass = vec![0.0; k];
    for (p, &c) in assign.iter().enumerate() {
        sums.row_mut(c).scaled_add(weights[p], &points.row(p));
        mass[c] += weights[p];
    }
    for c in 0..k {
        if mass[c] > 0.0 {
            let mean = &sums.row(c) / mass[c];
            centers.row_mut(c).assign(&mean);
        }
    }
}

/// Weighted Lloyd iterations from a seeded k-means++ start. Stops when the
/// assignment vector repeats exactly, or after `max_iter` updates.
pub fn kmeans(
    points: ArrayView2<'_, f64>,
    weights: Option<ArrayView1<'_, f64>>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansResult> {
    let n = points.nrows();
    if n == 0 {
        return Err(Error::Empty("k-means input has no points"));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={n}")));
    }
    let weights: Vec<f64> = match weights {
        None => vec![1.0; n],
        Some(w) => {
            if w.len() != n {
                return Err(Error::ShapeMismatch(format!("{} weights for {n} points", w.len())));
            }
            if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(Error::NonPositiveWeight { index, value });
            }
            w.to_vec()
        }
    };

    let mut rng = rng::rng(seed);
    let (mut centers, degenerate) = plus_plus(points, &weights, k, &mut rng);
    if degenerate {
        log::warn!("k-means: fewer than {k} distinct points; returning duplicated centers");
    }

    let mut assign = assign_nearest(points, centers.view());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        repair_empty(points, centers.view(), &mut assign, k);
        update_centers(points, &weights, &assign, &mut centers);
        trace.push(inertia(points, &weights, centers.view(), &assign));
        iterations += 1;
        let next = assign_nearest(points, centers.view());
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
    }
    let final_inertia = inertia(points, &weights, centers.view(), &assign);
    Ok(KMeansResult {
        centers,
        assignments: assign,
        inertia: final_inertia,
        inertia_trace: trace,
        iterations,
        converged,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn k_one_gives_weighted_mean() {
        let pts = array![[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]];
        let w = array![0.5, 0.25, 0.25];
        let res = kmeans(pts.view(), Some(w.view()), 1, 3, 100).unwrap();
        assert!((res.centers[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((res.centers[[0, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn k_equal_n_recovers_points() {
        let pts = array![[0.0], [3.0], [-1.0], [7.5]];
        let res = kmeans(pts.view(), None, 4, 11, 100).unwrap();
        assert_eq!(res.inertia, 0.0);
        let mut c: Vec<f64> = res.centers.column(0).to_vec();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![-1.0, 0.0, 3.0, 7.5]);
    }

    /// Best 2-partition of a 1D point set by exhaustive enumeration.
    fn best_two_partition(xs: &[f64]) -> (f64, f64) {
        let n = xs.len();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for mask in 1..(1u32 << n) - 1 {
            let (a, b): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (mask >> i & 1 == 1, xs[i])).fold(
                (vec![], vec![]),
                |(mut a, mut b), (in_a, x)| {
                    if in_a { a.push(x) } else { b.push(x) }
                    (a, b)
                },
            );
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let cost: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
                + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
            if cost < best.0 {
                best = (cost, ma.min(mb), ma.max(mb));
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn two_blobs_match_enumeration() {
        let xs = [0.0, 0.1, 0.2, 10.0, 10.1];
        let (lo, hi) = best_two_partition(&xs);
        assert!((lo - 0.1).abs() < 1e-12 && (hi - 10.05).abs() < 1e-12);
        let pts = Array2::from_shape_vec((5, 1), xs.to_vec()).unwrap();
        for seed in 0..10 {
            let res = kmeans(pts.view(), None, 2, seed, 100).unwrap();
            let mut c: Vec<f64> = res.centers.column(0).to_vec();
            c.sort_by(f64::total_cmp);
            assert!((c[0] - lo).abs() < 1e-12 && (c[1] - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_points_flag_degenerate() {
        let pts = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let res = kmeans(pts.view(), None, 2, 0, 100).unwrap();
        assert!(res.degenerate);
        assert_eq!(res.centers.row(0), res.centers.row(1));
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn invalid_k() {
        let pts = array![[0.0], [1.0]];
        assert!(kmeans(pts.view(), None, 3, 0, 100).is_err());
        assert!(kmeans(pts.view(), None, 0, 0, 100).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        let pts = array![[0.0], [1.0]];
        let w = array![1.0, 0.0];
        assert!(kmeans(pts.view(), Some(w.view()), 1, 0, 100).is_err());
    }

    #[test]
    fn repair_fills_empty_cluster() {
        let pts = array![[0.0], [1.0], [9.0]];
        let centers = array![[0.0], [100.0]];
        let mut assign = vec![0, 0, 0];
        repair_empty(pts.view(), centers.view(), &mut assign, 2);
        assert_eq!(assign, vec![0, 0, 1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn lloyd_invariants(
                raw in proptest::collection::vec(-20.0f64..20.0, 6..80),
                wraw in proptest::collection::vec(0.1f64..3.0, 40),
                k in 1usize..5,
                seed in 0u64..1000,
            ) {
                let n = raw.len() / 2;
                let pts = Array2::from_shape_vec((n, 2), raw[..2 * n].to_vec()).unwrap();
                let w: Array1<f64> = (0..n).map(|i| wraw[i % wraw.len()]).collect();
                let k = k.min(n);
                let a = kmeans(pts.view(), Some(w.view()), k, seed, 100).unwrap();
                let b = kmeans(pts.view(), Some(w.view()), k, seed, 100).unwrap();
                // same seed, bitwise same output
                prop_assert_eq!(&a.assignments, &b.assignments);
                prop_assert!(a.centers.iter().zip(b.centers.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
                for pair in a.inertia_trace.windows(2) {
                    prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-12);
                }
                prop_assert!(a.assignments.iter().all(|&c| c < k));
                for col in 0..2 {
                    let lo = pts.column(col).iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = pts.column(col).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    for &c in a.centers.column(col) {
                        prop_assert!(c.is_finite() && c >= lo - 1e-9 && c <= hi + 1e-9);
                    }
                }
            }
        }
    }
}
