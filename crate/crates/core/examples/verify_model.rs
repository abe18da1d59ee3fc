//! Check the modelling assumptions on generated ground truth: slow subspace
//! change of the background, denseness of its basis on the foreground support,
//! and slow support change.
//!
//! cargo run --release --example verify_model

use reprocs::datagen::{simulate, Scenario};
use reprocs::eval::{verify_denseness, verify_slow_subspace_change, verify_support_dynamics};

fn main() -> reprocs::Result<()> {
    let data = simulate(Scenario::Table1 { support_len: 9, magnitude: 100.0 }, 0, 200)?;
    let mut background = data.train.clone();
    for l in data.l_true.frames() {
        background.push(l)?;
    }
    let tau = 200;
    let change = verify_slow_subspace_change(&background, tau, 99.99)?;
    let before: Vec<f64> = change.iter().filter(|&(t, _)| t + 1 < data.t_change).map(|(_, v)| v).collect();
    let after: Vec<f64> = change.iter().filter(|&(t, _)| t + 1 >= data.t_change).map(|(_, v)| v).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("slow subspace change, tau={tau}: mean ratio before change {:.2e}, after {:.2e}", mean(&before), mean(&after));

    let dense = verify_denseness(&data.p0, &data.supports)?;
    let worst = dense.per_frame.iter().copied().fold(0.0, f64::max);
    println!("denseness of P0 on the supports: mean {:.3}, worst {worst:.3}", dense.aggregate);

    let dyn_ = verify_support_dynamics(&data.supports, data.n())?;
    println!(
        "support: mean size {:.3} n, mean added {:.3}, mean removed {:.3}",
        dyn_.size.aggregate, dyn_.added.aggregate, dyn_.removed.aggregate
    );
    Ok(())
}
