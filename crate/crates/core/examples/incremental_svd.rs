//! Build the left singular pair of a matrix one column batch at a time.
//!
//! cargo run --example incremental_svd

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use reprocs::linalg::svd::singular_values;
use reprocs::linalg::{inc_svd, subspace_error, BasisMatrix, SingularSpectrum};

fn main() -> reprocs::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // 30 x 60 matrix of rank 4
    let f: Array2<f64> = Array2::from_shape_fn((30, 4), |_| rng.sample(StandardNormal));
    let g: Array2<f64> = Array2::from_shape_fn((4, 60), |_| rng.sample(StandardNormal));
    let x = f.dot(&g);

    let mut p = BasisMatrix::empty(30);
    let mut sigma = SingularSpectrum::empty();
    for start in (0..60).step_by(15) {
        (p, sigma) = inc_svd(&p, &sigma, x.slice(s![.., start..start + 15]))?;
        println!("after {:>2} columns: rank {}", start + 15, p.rank());
    }
    let direct = singular_values(x.view());
    for (i, (a, b)) in sigma.values().iter().zip(&direct).enumerate() {
        println!("sigma_{i}: incremental {a:.10} direct {b:.10}");
    }
    let span = BasisMatrix::new(reprocs::linalg::svd::thin_svd(f.view()).u)?;
    println!("SE(span F, P) = {:.2e}", subspace_error(&span, &p)?);
    Ok(())
}
