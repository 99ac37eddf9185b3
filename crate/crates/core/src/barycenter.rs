//! Free-support Wasserstein barycenters by particle flow.
//!
//! The barycenter is `sum_i v_i delta_{z_i}` with fixed weights `v`. Each
//! iteration solves the exact plans from the current atoms to every input
//! measure, projects each atom onto its conditional target means, and moves
//!
//! ```text
//! z_i <- (1 - 2 eta) z_i + 2 eta sum_n pi_n T_n(z_i)
//! ```
//!
//! With `eta = 1/2` the atoms jump straight to the weighted average of their
//! projections. For `eta` in `(0, 1/2]` the objective never increases: the
//! update lowers the frozen-plan cost, and re-solving the plans can only
//! lower it further.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::kmeans;
use crate::measures::{normalize_weights, pool_supports, DiscreteMeasure, WeightedFamily};
use crate::ot::TransportPlan;
use crate::projection::{plans_to_family, projection_average};

/// Objectives below this are treated as exact convergence.
pub const OBJECTIVE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// k-means centers of all pooled input atoms.
    KMeansPooled,
    /// Start from the given `m x d` support.
    UserSupplied(Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub step_size: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub support_size: usize,
    pub init: InitMode,
    pub seed: u64,
    /// Barycenter weights `v`; uniform when `None`.
    pub weights: Option<Array1<f64>>,
}

impl SolverOptions {
    pub fn new(support_size: usize) -> Self {
        Self {
            step_size: 0.5,
            tolerance: 1e-6,
            max_iterations: 200,
            support_size,
            init: InitMode::KMeansPooled,
            seed: 0,
            weights: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_step_size(mut self, eta: f64) -> Self {
        self.step_size = eta;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_step(self.step_size)?;
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.support_size == 0 {
            return Err(Error::InvalidParameter("support size must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_step(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step size {eta} outside (0, 0.5]")))
    }
}

/// An iterate of the particle flow.
#[derive(Debug, Clone)]
pub struct BarycenterState {
    pub support: Array2<f64>,
    pub weights: Array1<f64>,
    pub iteration: usize,
    /// `F` at the initial support and after every update.
    pub objective_trace: Vec<f64>,
    /// `max_i |sum_n pi_n (T_n(z_i) - z_i)|` at the support each update started from.
    pub residual_trace: Vec<f64>,
    pub converged: bool,
}

impl BarycenterState {
    pub fn new(support: Array2<f64>, weights: Array1<f64>) -> Self {
        Self {
            support,
            weights,
            iteration: 0,
            objective_trace: Vec::new(),
            residual_trace: Vec::new(),
            converged: false,
        }
    }

    pub fn measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.support.clone(), Some(self.weights.clone()))
    }

    pub fn objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}

fn objective_from_plans(plans: &[TransportPlan], family: &WeightedFamily) -> f64 {
    plans.iter().zip(family.family_weights()).map(|(p, pi)| pi * p.cost()).sum()
}

/// `F(candidate) = sum_n pi_n W_2^2(candidate, mu_n)`, with exact plans.
pub fn objective(candidate: &DiscreteMeasure, family: &WeightedFamily) -> Result<f64> {
    let plans = plans_to_family(candidate, family)?;
    Ok(objective_from_plans(&plans, family))
}

/// Starting support per `opts.init`, with uniform (or supplied) weights.
pub fn initialize(family: &WeightedFamily, opts: &SolverOptions) -> Result<BarycenterState> {
    opts.validate()?;
    if family.is_empty() {
        return Err(Error::Empty("family has no measures"));
    }
    let m = opts.support_size;
    let weights = match &opts.weights {
        None => Array1::from_elem(m, 1.0 / m as f64),
        Some(v) => normalize_weights(v.clone(), m)?,
    };
    let support = match &opts.init {
        InitMode::KMeansPooled => {
            let pooled = pool_supports(family)?;
            if m > pooled.len() {
                return Err(Error::InvalidParameter(format!(
                    "support size {m} exceeds the {} pooled atoms",
                    pooled.len()
                )));
            }
            kmeans::kmeans(pooled.support(), Some(pooled.weights()), m, opts.seed, kmeans::DEFAULT_MAX_ITER)?
                .centers
        }
        InitMode::UserSupplied(z) => {
            if z.nrows() != m {
                return Err(Error::ShapeMismatch(format!("initial support has {} rows, expected {m}", z.nrows())));
            }
            if z.ncols() != family.dim() {
                return Err(Error::DimensionMismatch { expected: family.dim(), found: z.ncols() });
            }
            z.clone()
        }
    };
    // validates finiteness
    DiscreteMeasure::new(support.clone(), Some(weights.clone()))?;
    Ok(BarycenterState::new(support, weights))
}

/// `(1 - 2 eta) z + 2 eta avg`, elementwise.
pub fn advect(support: ArrayView2<'_, f64>, projection_avg: ArrayView2<'_, f64>, eta: f64) -> Array2<f64> {
    let keep = 1.0 - 2.0 * eta;
    let moved = 2.0 * eta;
    let mut out = support.to_owned();
    out.zip_mut_with(&projection_avg, |z, &t| *z = keep * *z + moved * t);
    out
}

fn max_row_norm(field: &Array2<f64>) -> f64 {
    field.outer_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max)
}

/// One particle-flow update. Appends `F` at the starting support when the
/// trace is empty, then `F` at the new support.
pub fn step(state: &BarycenterState, family: &WeightedFamily, eta: f64) -> Result<BarycenterState> {
    check_step(eta)?;
    let current = state.measure()?;
    let plans = plans_to_family(&current, family)?;
    let mut next = state.clone();
    if next.objective_trace.is_empty() {
        next.objective_trace.push(objective_from_plans(&plans, family));
    }
    let avg = projection_average(&plans, family)?;
    next.residual_trace.push(max_row_norm(&(&avg - &state.support)));
    next.support = advect(state.support.view(), avg.view(), eta);
    next.iteration += 1;
    let f = objective(&next.measure()?, family)?;
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: next.iteration });
    }
    next.objective_trace.push(f);
    Ok(next)
}

/// Runs the particle flow from `initialize(family, opts)` until the relative
/// objective change drops below `opts.tolerance`, the objective reaches the
/// floor, or `opts.max_iterations` updates have been taken.
pub fn solve(family: &WeightedFamily, opts: &SolverOptions) -> Result<BarycenterState> {
    let state = initialize(family, opts)?;
    solve_from(state, family, opts)
}

/// As [`solve`], from a given starting state.
pub fn solve_from(mut state: BarycenterState, family: &WeightedFamily, opts: &SolverOptions) -> Result<BarycenterState> {
    opts.validate()?;
    let eta = opts.step_size;
    let mut current = state.measure()?;
    let mut plans = plans_to_family(&current, family)?;
    let mut f = objective_from_plans(&plans, family);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: state.iteration });
    }
    state.objective_trace.push(f);
    if f < OBJECTIVE_FLOOR {
        state.converged = true;
        return Ok(state);
    }

    for _ in 0..opts.max_iterations {
        let avg = projection_average(&plans, family)?;
        state.residual_trace.push(max_row_norm(&(&avg - &state.support)));
        state.support = advect(state.support.view(), avg.view(), eta);
        state.iteration += 1;
        current = current.with_support(state.support.clone())?;
        plans = plans_to_family(&current, family)?;
        let next = objective_from_plans(&plans, family);
        if !next.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: state.iteration });
        }
        state.objective_trace.push(next);
        if next < OBJECTIVE_FLOOR || (next - f).abs() / f < opts.tolerance {
            state.converged = true;
            break;
        }
        f = next;
    }
    log::debug!(
        "barycenter: {} iterations, F = {:.6e}, converged = {}",
        state.iteration,
        f,
        state.converged
    );
    Ok(state)
}
