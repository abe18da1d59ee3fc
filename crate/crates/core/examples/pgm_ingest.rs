//! Turn a directory of PGM frames into a sequence file, train a checkpoint on
//! the first frames, save and reload it, and separate the rest.
//!
//! cargo run --release --example pgm_ingest

use reprocs::engine::{EngineParams, SubspaceMode};
use reprocs::io::{ingest_pgm_dir, read_sequence, write_pgm, Checkpoint, GrayImage};

const ROWS: usize = 24;
const COLS: usize = 32;

/// Two smooth patterns with slowly varying weights, plus an optional bright
/// square at column `x`.
fn frame(t: usize, square_at: Option<usize>) -> GrayImage {
    let a = 1.0 + 0.3 * (t as f64 / 7.0).sin();
    let b = 0.5 * (t as f64 / 11.0).cos();
    let mut pixels = Vec::with_capacity(ROWS * COLS);
    for r in 0..ROWS {
        for c in 0..COLS {
            let u = 60.0 + 2.0 * r as f64;
            let v = 40.0 * ((c as f64) / COLS as f64 - 0.5);
            let mut px = a * u + b * v;
            if let Some(x) = square_at {
                if (8..14).contains(&r) && (x..x + 5).contains(&c) {
                    px = 250.0;
                }
            }
            pixels.push(px.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage { rows: ROWS, cols: COLS, pixels }
}

fn main() -> reprocs::Result<()> {
    let dir = tempfile::tempdir()?;
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames)?;
    for t in 0..120 {
        let square = (t >= 80).then(|| (t - 80) % (COLS - 5));
        write_pgm(frames.join(format!("f{t:04}.pgm")), &frame(t, square))?;
    }
    let seq_path = dir.path().join("video.seq");
    let summary = ingest_pgm_dir(&frames, &seq_path)?;
    println!("ingested {} frames of {}x{}", summary.frames, summary.rows, summary.cols);

    let video = read_sequence(&seq_path)?;
    let ckpt = Checkpoint::train(&video.range(0, 80), 99.0, true)?;
    ckpt.save(dir.path().join("ckpt"))?;
    let ckpt = Checkpoint::load(dir.path().join("ckpt"))?;
    println!("checkpoint: r_hat {} sigma_min {:.3}", ckpt.r_hat(), ckpt.sigma_min());

    let mut engine = ckpt.engine(EngineParams::default(), SubspaceMode::Ppca)?;
    for t in 80..video.len() {
        let centered = &video.frame(t) - &ckpt.mean;
        let r = engine.process_frame(centered.view())?;
        if t % 8 == 0 {
            println!("frame {t}: {} foreground pixels", r.support.len());
        }
    }
    Ok(())
}
