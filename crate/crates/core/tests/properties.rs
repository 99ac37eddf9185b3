use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use wbary::barycenter::{self, InitMode, SolverOptions};
use wbary::measures::{DiscreteMeasure, WeightedFamily};
use wbary::ot::{self, solve_ot, w2_distance};
use wbary::projection;
use wbary::rng::{self, Rng};

fn points(n: usize, d: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| {
        let z: f64 = StandardNormal.sample(rng);
        2.0 * z
    })
}

fn weights(n: usize, rng: &mut Rng) -> Array1<f64> {
    let w: Array1<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s = w.sum();
    w / s
}

fn measure(max_atoms: usize, d: usize, rng: &mut Rng) -> DiscreteMeasure {
    let n = rng.random_range(1..=max_atoms);
    DiscreteMeasure::new(points(n, d, rng), Some(weights(n, rng))).unwrap()
}

fn family(max_members: usize, max_atoms: usize, d: usize, rng: &mut Rng) -> WeightedFamily {
    let n = rng.random_range(1..=max_members);
    let members = (0..n).map(|_| measure(max_atoms, d, rng)).collect();
    WeightedFamily::new(members, Some(weights(n, rng))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plans_are_feasible_and_certified(seed in any::<u64>()) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let (a, b) = (measure(12, d, &mut r), measure(12, d, &mut r));
        let plan = solve_ot(&a, &b).unwrap();
        let rows = plan.mass().sum_axis(Axis(1));
        let cols = plan.mass().sum_axis(Axis(0));
        for (x, y) in rows.iter().zip(a.weights()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in cols.iter().zip(b.weights()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!(plan.mass().iter().all(|&v| v >= 0.0));
        let cost = ot::squared_distances(a.support(), b.support());
        prop_assert!(plan.slackness_violation(cost.view()) <= 1e-7);
    }

    #[test]
    fn w2_is_symmetric(seed in any::<u64>()) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let (a, b) = (measure(10, d, &mut r), measure(10, d, &mut r));
        let (ab, ba) = (w2_distance(&a, &b).unwrap(), w2_distance(&b, &a).unwrap());
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1e-12));
    }

    #[test]
    fn w2_triangle_inequality(seed in any::<u64>()) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let (a, b, c) = (measure(8, d, &mut r), measure(8, d, &mut r), measure(8, d, &mut r));
        let ac = w2_distance(&a, &c).unwrap();
        prop_assert!(ac <= w2_distance(&a, &b).unwrap() + w2_distance(&b, &c).unwrap() + 1e-9);
    }

    #[test]
    fn one_dimensional_quantile_matching(values in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
        let n = a.len();
        let mu = DiscreteMeasure::uniform(Array2::from_shape_vec((n, 1), a.clone()).unwrap()).unwrap();
        let nu = DiscreteMeasure::uniform(Array2::from_shape_vec((n, 1), b.clone()).unwrap()).unwrap();
        let (mut sa, mut sb) = (a, b);
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let expected: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64;
        let cost = solve_ot(&mu, &nu).unwrap().cost();
        prop_assert!((cost - expected).abs() <= 1e-9 * expected.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projections_stay_in_target_bounding_box(seed in any::<u64>()) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let (a, b) = (measure(10, d, &mut r), measure(10, d, &mut r));
        let plan = solve_ot(&a, &b).unwrap();
        let t = projection::barycentric_projection(&plan, &b).unwrap();
        for k in 0..d {
            let col = b.support().column(k).to_owned();
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            prop_assert!(t.column(k).iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn descent_is_monotone(seed in any::<u64>(), eta in 0.01f64..=0.5) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let fam = family(4, 15, d, &mut r);
        let m = r.random_range(1..=fam.total_atoms().min(12));
        let state = barycenter::solve(&fam, &SolverOptions::new(m).with_step_size(eta).with_seed(seed)).unwrap();
        for w in state.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10, "trace {:?}", state.objective_trace);
        }
    }

    #[test]
    fn translation_equivariance(seed in any::<u64>()) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let fam = family(3, 10, d, &mut r);
        let m = r.random_range(1..=fam.total_atoms().min(8));
        let init = points(m, d, &mut r);
        let shift: Array1<f64> = (0..d).map(|_| r.random_range(-20.0..20.0)).collect();
        let moved = WeightedFamily::new(
            fam.measures().iter().map(|mu| mu.translated(shift.view()).unwrap()).collect(),
            Some(fam.family_weights().to_owned()),
        )
        .unwrap();
        let opts = |z: Array2<f64>| SolverOptions::new(m).with_init(InitMode::UserSupplied(z)).with_max_iterations(15).with_tolerance(1e-15);
        let base = barycenter::solve(&fam, &opts(init.clone())).unwrap();
        let shifted = barycenter::solve(&moved, &opts(&init + &shift)).unwrap();
        let diff = (&shifted.support - &shift) - &base.support;
        prop_assert!(diff.iter().all(|v| v.abs() <= 1e-9), "max diff {}", diff.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }

    #[test]
    fn dirac_family_reaches_weighted_mean(seed in any::<u64>()) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let n = r.random_range(1..=5);
        let anchors = points(n, d, &mut r);
        let pi = weights(n, &mut r);
        let fam = WeightedFamily::new(
            anchors.rows().into_iter().map(|a| DiscreteMeasure::dirac(a.as_slice().unwrap()).unwrap()).collect(),
            Some(pi.clone()),
        )
        .unwrap();
        let m = r.random_range(1..=4);
        let init = points(m, d, &mut r);
        let opts = SolverOptions::new(m).with_init(InitMode::UserSupplied(init)).with_tolerance(1e-12);
        let state = barycenter::solve(&fam, &opts).unwrap();
        let target = pi.dot(&anchors);
        for z in state.support.rows() {
            let err = (&z - &target).mapv(|v| v * v).sum().sqrt();
            prop_assert!(err <= 1e-9, "atom {z} vs {target}");
        }
    }

    #[test]
    fn stationarity_residual_shrinks(seed in any::<u64>()) {
        let mut r = rng::rng(seed);
        let d = r.random_range(1..=3);
        let fam = WeightedFamily::uniform((0..3).map(|_| DiscreteMeasure::uniform(points(12, d, &mut r)).unwrap()).collect()).unwrap();
        let state = barycenter::solve(&fam, &SolverOptions::new(6).with_seed(seed).with_tolerance(1e-15).with_max_iterations(20)).unwrap();
        let trace = &state.residual_trace;
        prop_assert!(trace.last().unwrap() <= trace.first().unwrap(), "{trace:?}");
    }
}
