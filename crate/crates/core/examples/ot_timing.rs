use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use wbary::{rng, solve_ot, DiscreteMeasure};

fn cloud(n: usize, r: &mut rng::Rng) -> DiscreteMeasure {
    let pts: Vec<f64> = (0..2 * n).map(|_| r.random::<f64>() * 10.0).collect();
    DiscreteMeasure::uniform(Array2::from_shape_vec((n, 2), pts).unwrap()).unwrap()
}

fn main() {
    let mut r = rng::rng(1);
    for (m, n) in [(50, 100), (150, 100), (200, 200), (400, 400)] {
        let reps = 10;
        let t = Instant::now();
        let mut pivots = 0;
        for _ in 0..reps {
            let a = cloud(m, &mut r);
            let b = cloud(n, &mut r);
            pivots += solve_ot(&a, &b).unwrap().pivots();
        }
        println!("{m}x{n}: {:.2} ms/solve, {} pivots/solve", t.elapsed().as_secs_f64() * 1e3 / reps as f64, pivots / reps);
    }
}
