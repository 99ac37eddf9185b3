//! Barycentric projections of transport plans and the displacement fields
//! built from them.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, WeightedFamily};
use crate::ot::{solve_ot, TransportPlan};

/// One displacement vector per atom of the measure it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    vectors: Array2<f64>,
}

impl DisplacementField {
    pub fn new(vectors: Array2<f64>) -> Self {
        Self { vectors }
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.vectors
    }

    /// Largest Euclidean norm over atoms.
    pub fn max_norm(&self) -> f64 {
        self.vectors
            .outer_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Row `i` is `(1 / v_i) sum_j plan_ij x_j`: the conditional mean of the
/// target location given that mass leaves source atom `i`.
pub fn barycentric_projection(plan: &TransportPlan, target: &DiscreteMeasure) -> Result<Array2<f64>> {
    let mass = plan.mass();
    if mass.ncols() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "plan has {} columns but target has {} atoms",
            mass.ncols(),
            target.len()
        )));
    }
    let mut projected = mass.dot(&target.support());
    for (mut row, &v) in projected.axis_iter_mut(Axis(0)).zip(plan.source_weights()) {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("source weight {v} is not positive")));
        }
        row /= v;
    }
    Ok(projected)
}

/// Approximate logarithmic map: `T(z_i) - z_i` under the optimal plan from
/// `current` to `target`.
pub fn approx_log(current: &DiscreteMeasure, target: &DiscreteMeasure) -> Result<DisplacementField> {
    let plan = solve_ot(current, target)?;
    let projected = barycentric_projection(&plan, target)?;
    Ok(DisplacementField::new(projected - &current.support()))
}

/// Optimal plans from `current` to every member of `family`, solved in
/// parallel and returned in family order.
pub fn plans_to_family(current: &DiscreteMeasure, family: &WeightedFamily) -> Result<Vec<TransportPlan>> {
    if current.dim() != family.dim() {
        return Err(Error::DimensionMismatch { expected: family.dim(), found: current.dim() });
    }
    family.measures().par_iter().map(|mu| solve_ot(current, mu)).collect()
}

/// `sum_n pi_n T_n(z_i)` for precomputed plans, accumulated in family order.
pub fn projection_average(plans: &[TransportPlan], family: &WeightedFamily) -> Result<Array2<f64>> {
    let mut iter = plans.iter().zip(family.iter());
    let (plan, (pi, mu)) = iter.next().ok_or(Error::Empty("family has no measures"))?;
    let mut avg = barycentric_projection(plan, mu)? * pi;
    for (plan, (pi, mu)) in iter {
        avg.scaled_add(pi, &barycentric_projection(plan, mu)?);
    }
    Ok(avg)
}

/// Approximate gradient from frozen plans: `-2 sum_n pi_n (T_n(z_i) - z_i)`.
pub fn gradient_from_plans(
    current: &DiscreteMeasure,
    plans: &[TransportPlan],
    family: &WeightedFamily,
) -> Result<DisplacementField> {
    let avg = projection_average(plans, family)?;
    Ok(DisplacementField::new((avg - &current.support()) * -2.0))
}

/// Approximate Riemannian gradient of `F(mu) = sum_n pi_n W_2^2(mu, mu_n)` at `current`.
pub fn approx_gradient(current: &DiscreteMeasure, family: &WeightedFamily) -> Result<DisplacementField> {
    let plans = plans_to_family(current, family)?;
    gradient_from_plans(current, &plans, family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::solve_transport;
    use ndarray::{array, Array1};

    #[test]
    fn identity_coupling_gives_zero_displacement() {
        let mu = DiscreteMeasure::new(array![[0.0, 1.0], [2.0, 3.0]], Some(array![0.4, 0.6])).unwrap();
        let plan = solve_ot(&mu, &mu).unwrap();
        assert_eq!(plan.mass(), array![[0.4, 0.0], [0.0, 0.6]].view());
        let proj = barycentric_projection(&plan, &mu).unwrap();
        assert!((proj - &mu.support()).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn single_source_atom_projects_to_target_mean() {
        let src = DiscreteMeasure::dirac(&[7.0, -1.0]).unwrap();
        let tgt = DiscreteMeasure::new(array![[0.0, 0.0], [4.0, 2.0], [1.0, 5.0]], Some(array![0.5, 0.25, 0.25])).unwrap();
        let plan = solve_ot(&src, &tgt).unwrap();
        let proj = barycentric_projection(&plan, &tgt).unwrap();
        let mean = tgt.mean();
        assert!((proj.row(0).to_owned() - mean).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn hand_built_plan() {
        // rows (0.3*0 + 0.2*10)/0.5 = 4 and (0.5*10)/0.5 = 10
        let tgt = DiscreteMeasure::new(array![[0.0], [10.0]], Some(array![0.3, 0.7])).unwrap();
        let plan = solve_transport(
            array![0.5, 0.5].view(),
            array![0.3, 0.7].view(),
            array![[0.0, 100.0], [100.0, 0.0]].view(),
        )
        .unwrap();
        // The solver's optimum here is [[0.3,0.2],[0,0.5]].
        assert!((plan.mass()[[0, 0]] - 0.3).abs() < 1e-15);
        assert!((plan.mass()[[0, 1]] - 0.2).abs() < 1e-15);
        assert_eq!(plan.mass()[[1, 0]], 0.0);
        let proj = barycentric_projection(&plan, &tgt).unwrap();
        assert!((proj[[0, 0]] - 4.0).abs() < 1e-12);
        assert!((proj[[1, 0]] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn projection_shape_mismatch() {
        let a = DiscreteMeasure::uniform(array![[0.0], [1.0]]).unwrap();
        let b = DiscreteMeasure::uniform(array![[0.0], [1.0], [2.0]]).unwrap();
        let plan = solve_ot(&a, &b).unwrap();
        assert!(barycentric_projection(&plan, &a).is_err());
    }

    #[test]
    fn log_to_self_is_zero() {
        let mu = DiscreteMeasure::uniform(array![[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]]).unwrap();
        let field = approx_log(&mu, &mu).unwrap();
        assert!(field.vectors().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn log_between_diracs() {
        let a = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let b = DiscreteMeasure::dirac(&[5.0]).unwrap();
        assert_eq!(approx_log(&a, &b).unwrap().vectors(), array![[5.0]].view());
    }

    #[test]
    fn log_monotone_matching() {
        let a = DiscreteMeasure::uniform(array![[0.0], [1.0]]).unwrap();
        let b = DiscreteMeasure::uniform(array![[2.0], [3.0]]).unwrap();
        let field = approx_log(&a, &b).unwrap();
        assert!((field.into_inner() - array![[2.0], [2.0]]).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn gradient_zero_at_member() {
        let mu = DiscreteMeasure::uniform(array![[0.0, 0.0], [1.0, 2.0]]).unwrap();
        let fam = WeightedFamily::uniform(vec![mu.clone()]).unwrap();
        let g = approx_gradient(&mu, &fam).unwrap();
        assert!(g.max_norm() < 1e-14);
    }

    #[test]
    fn symmetric_diracs_cancel() {
        let cur = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let fam = WeightedFamily::uniform(vec![
            DiscreteMeasure::dirac(&[1.0]).unwrap(),
            DiscreteMeasure::dirac(&[-1.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(approx_gradient(&cur, &fam).unwrap().vectors(), array![[0.0]].view());
    }

    #[test]
    fn projection_lies_in_target_bounding_box() {
        let src = DiscreteMeasure::new(array![[0.0, 0.0], [5.0, 1.0], [2.0, 2.0]], Some(array![0.2, 0.5, 0.3])).unwrap();
        let tgt = DiscreteMeasure::new(array![[1.0, 3.0], [4.0, -1.0], [2.5, 0.5], [3.0, 3.0]], Some(array![0.1, 0.4, 0.3, 0.2])).unwrap();
        let plan = solve_ot(&src, &tgt).unwrap();
        let proj = barycentric_projection(&plan, &tgt).unwrap();
        for k in 0..2 {
            let col = tgt.support().column(k).to_owned();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for &p in proj.column(k) {
                assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn gradient_is_linear_in_family_weights_for_frozen_plans() {
        let cur = DiscreteMeasure::uniform(array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]).unwrap();
        let a = DiscreteMeasure::uniform(array![[3.0, 1.0], [0.5, 2.0]]).unwrap();
        let b = DiscreteMeasure::uniform(array![[-1.0, 0.0], [0.0, -2.0], [1.0, 4.0], [2.0, 2.0]]).unwrap();
        let alpha = 0.3;
        let mixed = WeightedFamily::new(vec![a.clone(), b.clone()], Some(Array1::from(vec![alpha, 1.0 - alpha]))).unwrap();
        let plans = plans_to_family(&cur, &mixed).unwrap();
        let g = gradient_from_plans(&cur, &plans, &mixed).unwrap();
        let ga = gradient_from_plans(&cur, &plans[..1], &WeightedFamily::uniform(vec![a]).unwrap()).unwrap();
        let gb = gradient_from_plans(&cur, &plans[1..], &WeightedFamily::uniform(vec![b]).unwrap()).unwrap();
        let combo = ga.into_inner() * alpha + gb.into_inner() * (1.0 - alpha);
        assert!((g.into_inner() - combo).iter().all(|x| x.abs() < 1e-12));
    }
}
