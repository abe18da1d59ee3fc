//! Recover a sparse vector from a projected measurement, with and without a
//! lower weight on a known part of the support.
//!
//! cargo run --example weighted_l1

use ndarray::Array1;
use rand::SeedableRng;
use reprocs::linalg::{perp_project, ProjectorHandle};
use reprocs::sparse::{least_squares_on_support, solve_weighted_l1, thresh, L1Problem, SolverConfig, SupportSet};

fn main() -> reprocs::Result<()> {
    let n = 64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let p = reprocs::linalg::BasisMatrix::new(reprocs::datagen::random_orthonormal(n, 6, &mut rng))?;
    let phi = ProjectorHandle::new(p);

    let mut s = Array1::zeros(n);
    for i in 20..28 {
        s[i] = 10.0;
    }
    let y = perp_project(&phi, s.view())?;
    let cfg = SolverConfig::default();
    let truth = SupportSet::block(20, 8);

    let known = SupportSet::block(20, 6);
    for (label, prob) in [
        ("plain", L1Problem::plain(&phi, y.view(), 1e-3)),
        ("weighted", L1Problem::weighted(&phi, y.view(), 1e-3, known, 0.1)),
    ] {
        let sol = solve_weighted_l1(&prob, &cfg)?;
        let support = thresh(sol.x.view(), 1.0);
        let values = least_squares_on_support(&phi, y.view(), &support)?;
        let err: f64 = (&values - &s).iter().map(|v| v * v).sum::<f64>().sqrt();
        println!(
            "{label:>8}: {} iterations, support {:?}, exact {}, error after LS {err:.2e}",
            sol.iterations,
            support.indices(),
            support == truth
        );
    }
    Ok(())
}
