//! Recover the sparse part from fewer measurements than entries: each frame is
//! observed through a random Gaussian matrix with m = 0.7 n rows.
//!
//! cargo run --release --example compressive -- [ratio]

use reprocs::datagen::{gen_gaussian_operator, simulate, Scenario};
use reprocs::engine::{EngineParams, SubspaceMode};
use reprocs::eval::{error_energies, separate_simulated};

fn main() -> reprocs::Result<()> {
    let ratio: f64 = std::env::args().nth(1).map_or(0.7, |s| s.parse().expect("ratio"));
    let data = simulate(Scenario::Table1 { support_len: 9, magnitude: 100.0 }, 1, 80)?;
    let m = (ratio * data.n() as f64).round() as usize;
    let a = gen_gaussian_operator(m, data.n(), 99, false)?;
    let params = EngineParams {
        b_percent: 99.99,
        ..EngineParams::default()
    };
    let run = separate_simulated(&data, params, SubspaceMode::Ppca, Some(&a))?;
    let (err, energy) = error_energies(&data.s_true, &run.s_hat)?;
    println!("{m} measurements of {} entries per frame", data.n());
    println!("nmse {:.3e}", err / energy);
    Ok(())
}
