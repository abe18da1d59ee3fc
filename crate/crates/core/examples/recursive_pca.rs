//! Projection PCA against the recursive-PCA variant on the same data.
//!
//! cargo run --release --example recursive_pca

use reprocs::datagen::{simulate, Scenario};
use reprocs::engine::{EngineParams, SubspaceMode};
use reprocs::eval::{error_energies, separate_simulated};

fn main() -> reprocs::Result<()> {
    let scenario: Scenario = "table1-27-large".parse()?;
    let data = simulate(scenario, 3, 120)?;
    let params = EngineParams {
        b_percent: 99.99,
        ..EngineParams::default()
    };
    for mode in [SubspaceMode::Ppca, SubspaceMode::RecursivePca] {
        let run = separate_simulated(&data, params, mode, None)?;
        let (err, energy) = error_energies(&data.s_true, &run.s_hat)?;
        // beta is the true background left outside the current estimate.
        let tail = &run.beta[run.beta.len() - 20..];
        println!(
            "{mode:?}: nmse {:.3e}, final rank {}, mean residual background over last 20 frames {:.3}",
            err / energy,
            run.state.basis().rank(),
            tail.iter().sum::<f64>() / tail.len() as f64
        );
    }
    Ok(())
}
