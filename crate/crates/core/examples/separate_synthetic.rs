//! Separate a simulated moving-block sequence and report the error.
//!
//! cargo run --release --example separate_synthetic -- [scenario] [seed]

use reprocs::datagen::{simulate, Scenario};
use reprocs::engine::{EngineParams, EngineState, SubspaceMode};
use reprocs::eval::error_energies;
use reprocs::FrameSequence;

fn main() -> reprocs::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario: Scenario = args.next().as_deref().unwrap_or("table1-9-large").parse()?;
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));

    let data = simulate(scenario, seed, 80)?;
    let (b_percent, q) = scenario.engine_hints();
    let params = EngineParams {
        b_percent,
        q,
        ..EngineParams::default()
    };
    let mut engine = EngineState::init(&data.train, params, SubspaceMode::Ppca)?;
    println!("trained on {} frames: n={} r_hat={}", data.train.len(), data.n(), engine.r_hat());

    let mut estimates = Vec::new();
    let mut exact = 0;
    for (m, truth) in data.measurements.frames().zip(&data.supports) {
        let r = engine.process_frame(m)?;
        if &r.support == truth {
            exact += 1;
        }
        estimates.push(r.s_hat);
    }
    let s_hat = FrameSequence::from_columns(data.n(), &estimates)?;
    let (err, energy) = error_energies(&data.s_true, &s_hat)?;
    println!("nmse {:.3e}", err / energy);
    println!("exact support on {exact}/{} frames", data.supports.len());
    for ev in engine.events() {
        println!(
            "change detected at t={} (true change {}), p-PCA steps {:?}",
            ev.detected_at, data.t_change, ev.steps
        );
    }
    Ok(())
}
