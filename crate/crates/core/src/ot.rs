//! Exact discrete optimal transport under squared Euclidean cost.
//!
//! The transportation LP is solved with a primal network simplex on the
//! complete bipartite graph between source and target atoms. A basis is a
//! spanning tree of `m + n - 1` cells. After each pivot only the subtree cut
//! off by the leaving cell is re-hung, and only its node potentials (the LP
//! duals) change.
//!
//! Pricing uses block search (most negative reduced cost within a cyclic
//! block of cells). When a run of degenerate pivots grows past `m + n`, the
//! solver switches to Bland's smallest-index rule for both the entering and
//! the leaving cell until a pivot moves positive mass. Bland's rule cannot
//! cycle, and every non-degenerate pivot strictly lowers the cost, so the
//! method terminates.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// An optimal coupling between two discrete measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    mass: Array2<f64>,
    source_weights: Array1<f64>,
    target_weights: Array1<f64>,
    cost: f64,
    row_potentials: Array1<f64>,
    col_potentials: Array1<f64>,
    pivots: usize,
}

impl TransportPlan {
    /// The `m x n` coupling matrix.
    pub fn mass(&self) -> ArrayView2<'_, f64> {
        self.mass.view()
    }

    pub fn source_weights(&self) -> ArrayView1<'_, f64> {
        self.source_weights.view()
    }

    pub fn target_weights(&self) -> ArrayView1<'_, f64> {
        self.target_weights.view()
    }

    /// `sum_ij mass_ij * c_ij`, in squared-distance units.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Dual potential of each source atom; the first is pinned to zero.
    pub fn row_potentials(&self) -> ArrayView1<'_, f64> {
        self.row_potentials.view()
    }

    /// Dual potential of each target atom.
    pub fn col_potentials(&self) -> ArrayView1<'_, f64> {
        self.col_potentials.view()
    }

    /// Number of simplex pivots taken.
    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Cells carrying positive mass, as `(i, j, mass)` in row-major order.
    pub fn nonzero_entries(&self) -> Vec<(usize, usize, f64)> {
        self.mass
            .indexed_iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect()
    }

    /// Largest violation of the complementary slackness certificate: dual
    /// infeasibility `f_i + g_j - c_ij` over all cells, and `|c_ij - f_i - g_j|`
    /// over cells with positive mass.
    pub fn slackness_violation(&self, cost: ArrayView2<'_, f64>) -> f64 {
        let mut worst = 0.0f64;
        for ((i, j), &c) in cost.indexed_iter() {
            let reduced = c - self.row_potentials[i] - self.col_potentials[j];
            worst = worst.max(-reduced);
            if self.mass[[i, j]] > 0.0 {
                worst = worst.max(reduced.abs());
            }
        }
        worst
    }
}

/// Squared Euclidean cost matrix, computed as `sum (z - x)^2` per pair.
pub fn squared_distances(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, n) = (a.nrows(), b.nrows());
    let mut cost = Array2::zeros((m, n));
    for (i, zi) in a.outer_iter().enumerate() {
        for (j, xj) in b.outer_iter().enumerate() {
            cost[[i, j]] = zi.iter().zip(xj.iter()).map(|(z, x)| (z - x) * (z - x)).sum();
        }
    }
    cost
}

/// Solves the transportation problem between `source` and `target`.
///
/// Atoms of both measures are ordered along the principal axis of their
/// union before the north-west-corner start, so the initial staircase is
/// close to a monotone matching. The returned plan uses the input order.
pub fn solve_ot(source: &DiscreteMeasure, target: &DiscreteMeasure) -> Result<TransportPlan> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
    }
    let axis = principal_axis(source.support(), target.support());
    let row_order = order_along(source.support(), &axis);
    let col_order = order_along(target.support(), &axis);

    let (m, n) = (source.len(), target.len());
    let (src, tgt) = (source.support(), target.support());
    let mut cost = Array2::zeros((m, n));
    for (pi, &i) in row_order.iter().enumerate() {
        let zi = src.row(i);
        for (pj, &j) in col_order.iter().enumerate() {
            let xj = tgt.row(j);
            cost[[pi, pj]] = zi.iter().zip(xj.iter()).map(|(z, x)| (z - x) * (z - x)).sum();
        }
    }
    let supply: Array1<f64> = row_order.iter().map(|&i| source.weights()[i]).collect();
    let demand: Array1<f64> = col_order.iter().map(|&j| target.weights()[j]).collect();
    let sorted = solve_transport(supply.view(), demand.view(), cost.view())?;

    let mut mass = Array2::zeros((m, n));
    let mut u = Array1::zeros(m);
    let mut v = Array1::zeros(n);
    for (pi, &i) in row_order.iter().enumerate() {
        u[i] = sorted.row_potentials[pi];
        for (pj, &j) in col_order.iter().enumerate() {
            mass[[i, j]] = sorted.mass[[pi, pj]];
        }
    }
    for (pj, &j) in col_order.iter().enumerate() {
        v[j] = sorted.col_potentials[pj];
    }
    let shift = u[0];
    u -= shift;
    v += shift;
    Ok(TransportPlan {
        mass,
        source_weights: source.weights().to_owned(),
        target_weights: target.weights().to_owned(),
        cost: sorted.cost,
        row_potentials: u,
        col_potentials: v,
        pivots: sorted.pivots,
    })
}

/// Leading eigenvector of the second-moment matrix of the centered union,
/// by a fixed number of power iterations from the all-ones vector.
fn principal_axis(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array1<f64> {
    let d = a.ncols();
    let count = (a.nrows() + b.nrows()) as f64;
    let mean = (a.sum_axis(ndarray::Axis(0)) + b.sum_axis(ndarray::Axis(0))) / count;
    let mut moment = Array2::<f64>::zeros((d, d));
    for row in a.outer_iter().chain(b.outer_iter()) {
        let c = &row - &mean;
        for p in 0..d {
            for q in 0..d {
                moment[[p, q]] += c[p] * c[q];
            }
        }
    }
    let mut axis = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    for _ in 0..30 {
        let next = moment.dot(&axis);
        let norm = next.dot(&next).sqrt();
        if !(norm > 0.0) {
            break;
        }
        axis = next / norm;
    }
    axis
}

/// Stable sort of row indices by projection onto `axis`.
fn order_along(points: ArrayView2<'_, f64>, axis: &Array1<f64>) -> Vec<usize> {
    let keys: Vec<f64> = points.outer_iter().map(|r| r.dot(axis)).collect();
    let mut order: Vec<usize> = (0..points.nrows()).collect();
    order.sort_by(|&x, &y| keys[x].total_cmp(&keys[y]));
    order
}

/// `W_2(a, b)`.
pub fn w2_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(solve_ot(a, b)?.cost().max(0.0).sqrt())
}

/// Solves `min <cost, P>` over couplings of `supply` and `demand` for an
/// arbitrary cost matrix. Both marginals must be positive with equal totals.
pub fn solve_transport(
    supply: ArrayView1<'_, f64>,
    demand: ArrayView1<'_, f64>,
    cost: ArrayView2<'_, f64>,
) -> Result<TransportPlan> {
    let (m, n) = cost.dim();
    if supply.len() != m || demand.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "cost is {m}x{n} but marginals have lengths {} and {}",
            supply.len(),
            demand.len()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::Empty("transport marginal"));
    }
    let cost_vec: Vec<f64> = cost.iter().copied().collect();
    let mut simplex = Simplex::new(m, n, &cost_vec, supply, demand);
    simplex.run()?;

    let mass = Array2::from_shape_vec((m, n), simplex.flow.clone())
        .expect("flow has m*n entries");
    let total: f64 = simplex.basis().map(|cell| simplex.flow[cell] * cost_vec[cell]).sum();
    Ok(TransportPlan {
        mass,
        source_weights: supply.to_owned(),
        target_weights: demand.to_owned(),
        cost: total.max(0.0),
        row_potentials: Array1::from(simplex.u.clone()),
        col_potentials: Array1::from(simplex.v.clone()),
        pivots: simplex.pivots,
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Pricing {
    Block,
    Bland,
}

const NONE: usize = usize::MAX;

/// Node ids: rows are `0..m`, columns are `m..m+n`. Cells are `i * n + j`.
struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    flow: Vec<f64>,
    is_basic: Vec<bool>,
    /// Per node: `(cell, neighbour)` for every incident basic cell.
    adj: Vec<Vec<(usize, usize)>>,
    u: Vec<f64>,
    v: Vec<f64>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    queue: Vec<usize>,
    path_row: Vec<usize>,
    path_col: Vec<usize>,
    eps: f64,
    block: usize,
    cursor: usize,
    pivots: usize,
}

impl<'a> Simplex<'a> {
    fn new(
        m: usize,
        n: usize,
        cost: &'a [f64],
        supply: ArrayView1<'_, f64>,
        demand: ArrayView1<'_, f64>,
    ) -> Self {
        let max_cost = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let cells = m * n;
        let block = ((cells as f64).sqrt().ceil() as usize).max(16).min(cells);
        let mut s = Self {
            m,
            n,
            cost,
            flow: vec![0.0; cells],
            is_basic: vec![false; cells],
            adj: vec![Vec::new(); m + n],
            u: vec![0.0; m],
            v: vec![0.0; n],
            parent: vec![NONE; m + n],
            parent_cell: vec![NONE; m + n],
            depth: vec![0; m + n],
            queue: Vec::with_capacity(m + n),
            path_row: Vec::new(),
            path_col: Vec::new(),
            eps: 1e-12 * max_cost,
            block,
            cursor: 0,
            pivots: 0,
        };
        s.north_west_corner(supply, demand);
        s.build_tree();
        s
    }

    /// Staircase basis: exactly `m + n - 1` cells, always a spanning tree.
    fn north_west_corner(&mut self, supply: ArrayView1<'_, f64>, demand: ArrayView1<'_, f64>) {
        let (m, n) = (self.m, self.n);
        let mut left: Vec<f64> = supply.to_vec();
        let mut need: Vec<f64> = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        for _ in 0..(m + n - 1) {
            let x = left[i].min(need[j]).max(0.0);
            left[i] -= x;
            need[j] -= x;
            self.add_basic(i, j, x);
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 {
                i += 1;
            } else if left[i] <= need[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    fn basis(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).flat_map(move |i| self.adj[i].iter().map(|&(cell, _)| cell))
    }

    fn add_basic(&mut self, i: usize, j: usize, x: f64) {
        let cell = i * self.n + j;
        self.flow[cell] = x;
        self.is_basic[cell] = true;
        self.adj[i].push((cell, self.m + j));
        self.adj[self.m + j].push((cell, i));
    }

    fn remove_basic(&mut self, cell: usize) {
        let (i, j) = (cell / self.n, cell % self.n);
        self.flow[cell] = 0.0;
        self.is_basic[cell] = false;
        for node in [i, self.m + j] {
            if let Some(pos) = self.adj[node].iter().position(|&(c, _)| c == cell) {
                self.adj[node].swap_remove(pos);
            }
        }
    }

    /// Sets the potential of `node` from its tree edge to `from`.
    #[inline]
    fn set_potential(&mut self, node: usize, from: usize, cell: usize) {
        if node >= self.m {
            self.v[node - self.m] = self.cost[cell] - self.u[from];
        } else {
            self.u[node] = self.cost[cell] - self.v[from - self.m];
        }
    }

    /// Hangs the subtree containing `start` below `anchor` through `via`,
    /// refreshing parents, depths and potentials. With `anchor == NONE`,
    /// `start` becomes the root with `u_start = 0`.
    fn hang(&mut self, start: usize, anchor: usize, via: usize) {
        self.parent[start] = anchor;
        self.parent_cell[start] = via;
        if anchor == NONE {
            self.depth[start] = 0;
            self.u[start] = 0.0;
        } else {
            self.depth[start] = self.depth[anchor] + 1;
            self.set_potential(start, anchor, via);
        }
        self.queue.clear();
        self.queue.push(start);
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            for k in 0..self.adj[node].len() {
                let (cell, other) = self.adj[node][k];
                if cell == self.parent_cell[node] {
                    continue;
                }
                self.parent[other] = node;
                self.parent_cell[other] = cell;
                self.depth[other] = self.depth[node] + 1;
                self.set_potential(other, node, cell);
                self.queue.push(other);
            }
        }
    }

    fn build_tree(&mut self) {
        self.hang(0, NONE, NONE);
        debug_assert_eq!(self.queue.len(), self.m + self.n, "basis is not a spanning tree");
    }

    fn price_bland(&self) -> Option<usize> {
        let n = self.n;
        for i in 0..self.m {
            let row = &self.cost[i * n..(i + 1) * n];
            for j in 0..n {
                let rc = row[j] - self.u[i] - self.v[j];
                if rc < -self.eps && !self.is_basic[i * n + j] {
                    return Some(i * n + j);
                }
            }
        }
        None
    }

    fn price_block(&mut self) -> Option<usize> {
        let (m, n) = (self.m, self.n);
        let cells = m * n;
        let mut best = NONE;
        let mut best_rc = -self.eps;
        let mut in_block = 0;
        let (mut i, mut j) = (self.cursor / n, self.cursor % n);
        let mut c = self.cursor;
        for _ in 0..cells {
            let rc = self.cost[c] - self.u[i] - self.v[j];
            if rc < best_rc && !self.is_basic[c] {
                best_rc = rc;
                best = c;
            }
            c += 1;
            j += 1;
            if j == n {
                j = 0;
                i += 1;
                if i == m {
                    i = 0;
                    c = 0;
                }
            }
            in_block += 1;
            if in_block == self.block {
                if best != NONE {
                    break;
                }
                in_block = 0;
            }
        }
        self.cursor = c;
        (best != NONE).then_some(best)
    }

    /// Tree paths from the entering cell's row and column up to their
    /// common ancestor, left in `path_row` and `path_col`.
    fn find_cycle(&mut self, entering: usize) {
        let mut a = entering / self.n;
        let mut b = self.m + entering % self.n;
        self.path_row.clear();
        self.path_col.clear();
        while self.depth[a] > self.depth[b] {
            self.path_row.push(self.parent_cell[a]);
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            self.path_col.push(self.parent_cell[b]);
            b = self.parent[b];
        }
        while a != b {
            self.path_row.push(self.parent_cell[a]);
            a = self.parent[a];
            self.path_col.push(self.parent_cell[b]);
            b = self.parent[b];
        }
    }

    fn run(&mut self) -> Result<()> {
        let (m, n) = (self.m, self.n);
        let cap = 50 * (m + n) * m.max(n);
        let mut pricing = Pricing::Block;
        let mut degenerate_run = 0usize;
        loop {
            let entering = match pricing {
                Pricing::Block => self.price_block(),
                Pricing::Bland => self.price_bland(),
            };
            let Some(entering) = entering else {
                return Ok(());
            };
            if self.pivots >= cap {
                return Err(Error::TransportNotConverged { pivots: self.pivots, rows: m, cols: n });
            }

            // Walking the cycle from the entering column back to the entering
            // row, cells alternate lose / gain: path_col in order, then
            // path_row reversed.
            self.find_cycle(entering);
            let (lc, lr) = (self.path_col.len(), self.path_row.len());
            let cycle_cell = |k: usize, s: &Self| if k < lc { s.path_col[k] } else { s.path_row[lr - 1 - (k - lc)] };
            let len = lc + lr;
            let mut theta = f64::INFINITY;
            let mut leaving = NONE;
            let mut leaving_pos = 0;
            for k in (0..len).step_by(2) {
                let cell = cycle_cell(k, self);
                let x = self.flow[cell];
                if x < theta || (x == theta && cell < leaving) {
                    theta = x;
                    leaving = cell;
                    leaving_pos = k;
                }
            }
            let theta = theta.max(0.0);
            if theta > 0.0 {
                for k in 0..len {
                    let cell = cycle_cell(k, self);
                    if k % 2 == 0 {
                        self.flow[cell] = (self.flow[cell] - theta).max(0.0);
                    } else {
                        self.flow[cell] += theta;
                    }
                }
            }

            // The endpoint of the entering cell on the leaving cell's side of
            // the cycle sits in the subtree that gets cut off.
            let (p, q) = (entering / n, m + entering % n);
            let (inside, outside) = if leaving_pos < lc { (q, p) } else { (p, q) };
            self.remove_basic(leaving);
            self.add_basic(p, q - m, theta);
            self.hang(inside, outside, entering);
            self.pivots += 1;

            if theta > 0.0 {
                degenerate_run = 0;
                pricing = Pricing::Block;
            } else {
                degenerate_run += 1;
                if degenerate_run > m + n {
                    pricing = Pricing::Bland;
                }
            }
        }
    }
}
