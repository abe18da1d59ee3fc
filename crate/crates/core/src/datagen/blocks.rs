use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::sparse::SupportSet;

/// One contiguous block that stays put or shifts by one index per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSupportConfig {
    pub n: usize,
    pub block_len: usize,
    pub p_static: f64,
    pub p_up: f64,
    pub p_down: f64,
    pub magnitude: f64,
    /// First index of the block in frame 1; `None` draws it uniformly.
    pub start: Option<usize>,
    pub seed: u64,
}

impl Default for BlockSupportConfig {
    fn default() -> Self {
        BlockSupportConfig {
            n: 100,
            block_len: 9,
            p_static: 0.8,
            p_up: 0.1,
            p_down: 0.1,
            magnitude: 100.0,
            start: None,
            seed: 0,
        }
    }
}

impl BlockSupportConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_static, self.p_up, self.p_down];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p))
            || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config("move probabilities must sum to 1".into()));
        }
        if self.block_len == 0 || self.block_len > self.n {
            return Err(Error::Config(format!(
                "block of length {} does not fit in {}",
                self.block_len, self.n
            )));
        }
        if let Some(s) = self.start {
            if s + self.block_len > self.n {
                return Err(Error::Config("block start leaves the vector".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BlockOutput {
    pub supports: Vec<SupportSet>,
    pub s: FrameSequence,
    /// Frames (after the first) on which the block moved.
    pub moves: usize,
}

/// Supports follow a lazy random walk that reflects at the boundary: a step
/// that would leave `[0, n - block_len]` goes the other way instead.
pub fn gen_moving_block(cfg: &BlockSupportConfig, frames: usize) -> Result<BlockOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let last = cfg.n - cfg.block_len;
    let mut pos = match cfg.start {
        Some(s) => s,
        None => rng.random_range(0..=last),
    };
    let mut supports = Vec::with_capacity(frames);
    let mut s = Array2::zeros((cfg.n, frames));
    let mut moves = 0;
    for t in 0..frames {
        if t > 0 {
            let u: f64 = rng.random();
            let step: i64 = if u < cfg.p_static {
                0
            } else if u < cfg.p_static + cfg.p_up {
                1
            } else {
                -1
            };
            if step != 0 && last > 0 {
                let mut next = pos as i64 + step;
                if next < 0 || next > last as i64 {
                    next = pos as i64 - step;
                }
                pos = next as usize;
                moves += 1;
            }
        }
        for i in pos..pos + cfg.block_len {
            s[(i, t)] = cfg.magnitude;
        }
        supports.push(SupportSet::block(pos, cfg.block_len));
    }
    Ok(BlockOutput {
        supports,
        s: FrameSequence::new(s),
        moves,
    })
}
