use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::sparse::SupportSet;

/// A rectangular object drifting horizontally with nearly constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionBlockConfig {
    pub block_rows: usize,
    pub block_cols: usize,
    pub intensity_low: f64,
    pub intensity_high: f64,
    /// Horizontal centroid in pixels (0-based column coordinate).
    pub p0: f64,
    pub v0: f64,
    pub q_acc: f64,
    pub seed: u64,
}

impl Default for MotionBlockConfig {
    fn default() -> Self {
        MotionBlockConfig {
            block_rows: 45,
            block_cols: 25,
            intensity_low: 170.0,
            intensity_high: 230.0,
            p0: 27.0,
            v0: 0.5,
            q_acc: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MotionOutput {
    /// Foreground frames, row-major raster order, zero off the block.
    pub f: FrameSequence,
    pub supports: Vec<SupportSet>,
    pub centroids: Vec<f64>,
}

/// Draw `n ~ N(0, q)` conditioned on `|n| < 2 sqrt(q)`.
pub fn sample_truncated_gaussian<R: Rng + ?Sized>(rng: &mut R, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let sd = q.sqrt();
    let normal = Normal::new(0.0, sd).expect("positive std");
    loop {
        let x = normal.sample(rng);
        if x.abs() < 2.0 * sd {
            return x;
        }
    }
}

fn block_left(p: f64, block_cols: usize) -> f64 {
    p.round() - (block_cols / 2) as f64
}

/// Position-velocity state `g_t = G g_{t-1} + [0; n_t]` with `G = [1 1; 0 1]`.
/// The first frame uses `(p0, v0)` directly. When the block would leave the
/// image the velocity flips sign and the position mirrors back inside.
pub fn gen_motion_foreground(
    cfg: &MotionBlockConfig,
    rows: usize,
    cols: usize,
    frames: usize,
) -> Result<MotionOutput> {
    if cfg.block_rows > rows || cfg.block_cols > cols || cfg.block_rows == 0 || cfg.block_cols == 0
    {
        return Err(Error::Config("motion block does not fit in the image".into()));
    }
    if cfg.q_acc < 0.0 || cfg.intensity_high < cfg.intensity_low {
        return Err(Error::Config("invalid motion block parameters".into()));
    }
    let lo = (cfg.block_cols / 2) as f64;
    let hi = (cols - cfg.block_cols + cfg.block_cols / 2) as f64;
    if cfg.p0 < lo || cfg.p0 > hi {
        return Err(Error::Config("initial block position outside the image".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = rows * cols;
    let row0 = (rows - cfg.block_rows) / 2;
    let (mut p, mut v) = (cfg.p0, cfg.v0);
    let mut f = Array2::zeros((n, frames));
    let mut supports = Vec::with_capacity(frames);
    let mut centroids = Vec::with_capacity(frames);
    for t in 0..frames {
        if t > 0 {
            p += v;
            v += sample_truncated_gaussian(&mut rng, cfg.q_acc);
            // Reflect off the image borders, measured on the rounded position.
            if p.round() < lo {
                p = 2.0 * lo - p;
                v = -v;
            } else if p.round() > hi {
                p = 2.0 * hi - p;
                v = -v;
            }
            p = p.clamp(lo, hi);
        }
        let left = block_left(p, cfg.block_cols) as usize;
        let mut idx = Vec::with_capacity(cfg.block_rows * cfg.block_cols);
        for r in row0..row0 + cfg.block_rows {
            for c in left..left + cfg.block_cols {
                idx.push(r * cols + c);
            }
        }
        for &i in &idx {
            f[(i, t)] = rng.random_range(cfg.intensity_low..=cfg.intensity_high);
        }
        supports.push(SupportSet::from_sorted(idx));
        centroids.push(p);
    }
    Ok(MotionOutput {
        f: FrameSequence::new(f),
        supports,
        centroids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_block() {
        let cfg = MotionBlockConfig {
            q_acc: 0.0,
            v0: 0.0,
            ..MotionBlockConfig::default()
        };
        let out = gen_motion_foreground(&cfg, 72, 90, 30).unwrap();
        assert!(out.supports.windows(2).all(|w| w[0] == w[1]));
        assert!(out.centroids.iter().all(|&c| c == 27.0));
    }

    #[test]
    fn unit_velocity_advances_one_pixel() {
        let cfg = MotionBlockConfig {
            q_acc: 0.0,
            v0: 1.0,
            ..MotionBlockConfig::default()
        };
        let out = gen_motion_foreground(&cfg, 72, 90, 20).unwrap();
        for w in out.centroids.windows(2) {
            assert_eq!(w[1] - w[0], 1.0);
        }
        assert_eq!(out.supports[1].indices()[0], out.supports[0].indices()[0] + 1);
    }

    #[test]
    fn truncation_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bound = 2.0 * 0.02f64.sqrt();
        for _ in 0..1_000_000 {
            assert!(sample_truncated_gaussian(&mut rng, 0.02).abs() < bound);
        }
    }

    #[test]
    fn stays_inside_and_intensities_in_range() {
        let cfg = MotionBlockConfig {
            v0: 3.0,
            seed: 2,
            ..MotionBlockConfig::default()
        };
        let out = gen_motion_foreground(&cfg, 72, 90, 200).unwrap();
        for (t, sup) in out.supports.iter().enumerate() {
            assert_eq!(sup.len(), 45 * 25);
            let first_col = sup.indices()[0] % 90;
            assert!(first_col + 25 <= 90);
            for i in sup.iter() {
                let v = out.f.frame(t)[i];
                assert!((170.0..=230.0).contains(&v));
            }
        }
        assert_eq!(out.f.frame(0).iter().filter(|&&x| x != 0.0).count(), 45 * 25);
    }
}
