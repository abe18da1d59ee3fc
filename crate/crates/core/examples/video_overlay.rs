//! Foreground extraction on a rasterized scene: a rectangle drifting across a
//! textured background. Writes a few frames of the input, the recovered
//! foreground and the recovered background as PGM images.
//!
//! cargo run --release --example video_overlay -- [out_dir]

use std::path::PathBuf;

use ndarray::ArrayView1;
use reprocs::datagen::{simulate, Scenario};
use reprocs::engine::{EngineParams, SubspaceMode};
use reprocs::io::{write_pgm, Checkpoint, GrayImage};

fn to_image(rows: usize, cols: usize, v: ArrayView1<'_, f64>) -> GrayImage {
    GrayImage {
        rows,
        cols,
        pixels: v.iter().map(|x| x.round().clamp(0.0, 255.0) as u8).collect(),
    }
}

fn main() -> reprocs::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "overlay_out".into()));
    std::fs::create_dir_all(&out)?;
    let data = simulate(Scenario::LakeLikeMotion, 0, 60)?;
    let (rows, cols) = data.image_dims.expect("image scenario");

    let ckpt = Checkpoint::train(&data.train, 95.0, true)?;
    let mut engine = ckpt.engine(EngineParams::default(), SubspaceMode::Ppca)?;
    println!("{rows}x{cols} frames, background rank {}", ckpt.r_hat());

    let mut hits = 0usize;
    let mut total = 0usize;
    for (t, m) in data.measurements.frames().enumerate() {
        let centered = &m - &ckpt.mean;
        let r = engine.process_frame(centered.view())?;
        hits += r.support.intersection_len(&data.supports[t]);
        total += data.supports[t].len();
        if t % 20 == 19 {
            let fg = r.s_hat.mapv(f64::abs);
            let bg = &r.l_hat + &ckpt.mean;
            write_pgm(out.join(format!("input_{t:03}.pgm")), &to_image(rows, cols, m))?;
            write_pgm(out.join(format!("foreground_{t:03}.pgm")), &to_image(rows, cols, fg.view()))?;
            write_pgm(out.join(format!("background_{t:03}.pgm")), &to_image(rows, cols, bg.view()))?;
        }
    }
    println!("foreground pixels found: {hits}/{total}");
    println!("images written to {}", out.display());
    Ok(())
}
