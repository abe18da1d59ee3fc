//! Synthetic sequences with known ground truth.

mod blocks;
mod lowrank;
mod motion;

pub use blocks::{gen_moving_block, BlockOutput, BlockSupportConfig};
pub use lowrank::{
    gen_lowrank_ar, geometric_profile, random_orthonormal, LowRankConfig, LowRankOutput,
    REMOVAL_VARIANCE,
};
pub use motion::{gen_motion_foreground, sample_truncated_gaussian, MotionBlockConfig, MotionOutput};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::linalg::svd::householder_qr;
use crate::linalg::BasisMatrix;
use crate::operator::DenseOperator;
use crate::sparse::SupportSet;

#[derive(Debug, Clone)]
pub struct OverlayOutput {
    pub image: FrameSequence,
    pub s_true: FrameSequence,
    /// Mean of the first `training_frames` background frames.
    pub mu: Array1<f64>,
}

impl OverlayOutput {
    /// `Im_t - mu`.
    pub fn measurements(&self) -> FrameSequence {
        let mut m = self.image.matrix().to_owned();
        for mut c in m.columns_mut() {
            c -= &self.mu;
        }
        FrameSequence::new(m)
    }
}

/// Paste foreground pixels over the background on each frame's support.
/// `S_t` is `F_t - B_t` on the support and zero elsewhere.
pub fn overlay(
    background: &FrameSequence,
    foreground: &FrameSequence,
    supports: &[SupportSet],
    training_frames: usize,
) -> Result<OverlayOutput> {
    let (n, frames) = (background.n(), background.len());
    if foreground.n() != n {
        return Err(Error::dims(n, foreground.n()));
    }
    if foreground.len() != frames {
        return Err(Error::dims(frames, foreground.len()));
    }
    if supports.len() != frames {
        return Err(Error::dims(frames, supports.len()));
    }
    let mut image = background.matrix().to_owned();
    let mut s = Array2::zeros((n, frames));
    for (t, sup) in supports.iter().enumerate() {
        for i in sup.iter() {
            if i >= n {
                return Err(Error::OutOfRange(format!("support index {i} outside {n}")));
            }
            let f = foreground.frame(t)[i];
            image[(i, t)] = f;
            s[(i, t)] = f - background.frame(t)[i];
        }
    }
    let k = training_frames.min(frames);
    let mu = if k == 0 {
        Array1::zeros(n)
    } else {
        background.range(0, k).mean()
    };
    Ok(OverlayOutput {
        image: FrameSequence::new(image),
        s_true: FrameSequence::new(s),
        mu,
    })
}

/// `m x n` matrix with iid `N(0, 1/m)` entries. With `orthonormalize` the rows
/// are replaced by an orthonormal basis of their span (requires `m <= n`).
pub fn gen_gaussian_operator(
    m: usize,
    n: usize,
    seed: u64,
    orthonormalize: bool,
) -> Result<DenseOperator> {
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("positive std");
    let a = Array2::from_shape_fn((m, n), |_| normal.sample(&mut rng));
    if !orthonormalize {
        return Ok(DenseOperator::new(a));
    }
    if m > n {
        return Err(Error::Config("cannot orthonormalize rows when m > n".into()));
    }
    let (q, _) = householder_qr(a.t());
    Ok(DenseOperator::new(q.t().to_owned()))
}

/// Named simulation presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Moving block on the autoregressive background, `n = 100`.
    Table1 { support_len: usize, magnitude: f64 },
    /// Horizontally moving rectangle over a mean-offset low-rank background.
    LakeLikeMotion,
}

impl Scenario {
    pub const NAMES: [&'static str; 5] = [
        "table1-9-large",
        "table1-9-small",
        "table1-27-large",
        "table1-27-small",
        "lake-like-motion",
    ];

    /// Recommended `(b_percent, q)` engine settings.
    pub fn engine_hints(&self) -> (f64, f64) {
        match self {
            Scenario::Table1 { magnitude, .. } if *magnitude < 50.0 => (99.99, 0.25),
            Scenario::Table1 { .. } => (99.99, 1.0),
            Scenario::LakeLikeMotion => (95.0, 1.0),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Table1 {
                support_len,
                magnitude,
            } => {
                let size = if *magnitude < 50.0 { "small" } else { "large" };
                write!(f, "table1-{support_len}-{size}")
            }
            Scenario::LakeLikeMotion => f.write_str("lake-like-motion"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lake-like-motion" {
            return Ok(Scenario::LakeLikeMotion);
        }
        let parts: Vec<&str> = s.split('-').collect();
        if let ["table1", len, size] = parts.as_slice() {
            let support_len = match *len {
                "9" => 9,
                "27" => 27,
                _ => return Err(Error::Usage(format!("unknown scenario '{s}'"))),
            };
            let magnitude = match *size {
                "large" => 100.0,
                "small" => 10.0,
                _ => return Err(Error::Usage(format!("unknown scenario '{s}'"))),
            };
            return Ok(Scenario::Table1 {
                support_len,
                magnitude,
            });
        }
        Err(Error::Usage(format!(
            "unknown scenario '{s}' (expected one of {})",
            Scenario::NAMES.join(", ")
        )))
    }
}

/// A generated run split into a training prefix and the frames to separate.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub scenario: Scenario,
    pub seed: u64,
    /// Image shape when the vectors are rasterized images.
    pub image_dims: Option<(usize, usize)>,
    /// Sparse-free training measurements `M_1 .. M_t_train`.
    pub train: FrameSequence,
    /// `M_t` for `t > t_train`.
    pub measurements: FrameSequence,
    pub l_true: FrameSequence,
    pub s_true: FrameSequence,
    pub supports: Vec<SupportSet>,
    pub p0: BasisMatrix,
    pub p_new: BasisMatrix,
    pub t_train: usize,
    /// 1-based frame of the subspace change.
    pub t_change: usize,
}

impl SimulatedData {
    pub fn n(&self) -> usize {
        self.train.n()
    }
}

/// Derive an independent stream seed.
pub fn substream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const TABLE1_TRAIN: usize = 2000;
pub const TABLE1_POST: usize = 80;

/// Generate `t_train` training frames and `post_frames` frames with foreground.
pub fn simulate(scenario: Scenario, seed: u64, post_frames: usize) -> Result<SimulatedData> {
    match scenario {
        Scenario::Table1 {
            support_len,
            magnitude,
        } => {
            let lr = LowRankConfig {
                seed: substream_seed(seed, 1),
                ..LowRankConfig::default()
            };
            simulate_block(scenario, seed, lr, support_len, magnitude, post_frames)
        }
        Scenario::LakeLikeMotion => simulate_lake_like(seed, post_frames),
    }
}

/// Block-foreground run on an arbitrary low-rank configuration.
pub fn simulate_block(
    scenario: Scenario,
    seed: u64,
    lowrank: LowRankConfig,
    support_len: usize,
    magnitude: f64,
    post_frames: usize,
) -> Result<SimulatedData> {
    let t_train = lowrank.t_train;
    let lr = gen_lowrank_ar(&lowrank, t_train + post_frames)?;
    let blocks = gen_moving_block(
        &BlockSupportConfig {
            n: lowrank.n,
            block_len: support_len,
            magnitude,
            seed: substream_seed(seed, 2),
            ..BlockSupportConfig::default()
        },
        post_frames,
    )?;
    let train = lr.l.range(0, t_train);
    let l_true = lr.l.range(t_train, t_train + post_frames);
    let measurements = FrameSequence::new(&l_true.matrix() + &blocks.s.matrix());
    Ok(SimulatedData {
        scenario,
        seed,
        image_dims: None,
        train,
        measurements,
        l_true,
        s_true: blocks.s,
        supports: blocks.supports,
        p0: lr.p0,
        p_new: lr.p_new,
        t_train,
        t_change: lowrank.t_change,
    })
}

pub const LAKE_ROWS: usize = 36;
pub const LAKE_COLS: usize = 45;
pub const LAKE_TRAIN: usize = 200;

fn simulate_lake_like(seed: u64, post_frames: usize) -> Result<SimulatedData> {
    let (rows, cols) = (LAKE_ROWS, LAKE_COLS);
    let n = rows * cols;
    let t_train = LAKE_TRAIN;
    let total = t_train + post_frames;
    let lowrank = LowRankConfig {
        n,
        r0: 10,
        c_new: 1,
        t_train,
        t_change: t_train + 5,
        ar_coeff: 0.5,
        decay: 0.1,
        variance_profile: geometric_profile(4e5, 0.6, 10),
        new_variances: vec![2e3],
        decaying: 1,
        seed: substream_seed(seed, 1),
    };
    let lr = gen_lowrank_ar(&lowrank, total)?;

    // Background = offset + low-rank part + weak pixel noise.
    let mut noise_rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, 3));
    let mut bg = lr.l.matrix().to_owned();
    bg.mapv_inplace(|x| {
        let z: f64 = StandardNormal.sample(&mut noise_rng);
        100.0 + x + z
    });
    let background = FrameSequence::new(bg);

    let motion = gen_motion_foreground(
        &MotionBlockConfig {
            block_rows: 22,
            block_cols: 12,
            p0: 13.0,
            seed: substream_seed(seed, 2),
            ..MotionBlockConfig::default()
        },
        rows,
        cols,
        post_frames,
    )?;
    let mut foreground = Array2::zeros((n, total));
    let mut supports = vec![SupportSet::empty(); t_train];
    for t in 0..post_frames {
        foreground
            .column_mut(t_train + t)
            .assign(&motion.f.frame(t));
    }
    supports.extend(motion.supports.iter().cloned());
    let ov = overlay(&background, &FrameSequence::new(foreground), &supports, t_train)?;
    let m = ov.measurements();

    let mut l_true = background.range(t_train, total).into_matrix();
    for mut c in l_true.columns_mut() {
        c -= &ov.mu;
    }
    Ok(SimulatedData {
        scenario: Scenario::LakeLikeMotion,
        seed,
        image_dims: Some((rows, cols)),
        train: m.range(0, t_train),
        measurements: m.range(t_train, total),
        l_true: FrameSequence::new(l_true),
        s_true: ov.s_true.range(t_train, total),
        supports: supports.split_off(t_train),
        p0: lr.p0,
        p_new: lr.p_new,
        t_train,
        t_change: lowrank.t_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::LinearOperator;

    #[test]
    fn overlay_examples() {
        let b = FrameSequence::new(Array2::from_elem((6, 2), 3.0));
        let mut f = Array2::zeros((6, 2));
        f[(5, 0)] = 10.0;
        let f = FrameSequence::new(f);
        let none = vec![SupportSet::empty(); 2];
        let out = overlay(&b, &f, &none, 2).unwrap();
        assert_eq!(out.image, b);
        assert!(out.s_true.matrix().iter().all(|&x| x == 0.0));

        let sup = vec![SupportSet::block(5, 1), SupportSet::empty()];
        let out = overlay(&b, &f, &sup, 2).unwrap();
        assert_eq!(out.s_true.frame(0)[5], 7.0);
        assert_eq!(out.image.frame(0)[5], 10.0);
        assert_eq!(out.mu, Array1::from_elem(6, 3.0));

        let same = vec![SupportSet::block(0, 3); 2];
        let out = overlay(&b, &b, &same, 1).unwrap();
        assert!(out.s_true.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_operator_properties() {
        let a = gen_gaussian_operator(70, 100, 3, false).unwrap();
        let b = gen_gaussian_operator(70, 100, 3, false).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let mean_sq: f64 = a
            .matrix()
            .columns()
            .into_iter()
            .map(|c| c.dot(&c))
            .sum::<f64>()
            / 100.0;
        assert!((mean_sq - 1.0).abs() < 0.1, "{mean_sq}");
        assert_eq!(a.rows(), 70);

        let o = gen_gaussian_operator(30, 30, 4, true).unwrap();
        let delta1 = o
            .matrix()
            .columns()
            .into_iter()
            .map(|c| (1.0 - c.dot(&c)).abs())
            .fold(0.0, f64::max);
        assert!(delta1 < 1e-12);
    }

    #[test]
    fn scenario_names_round_trip() {
        for name in Scenario::NAMES {
            let s: Scenario = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("table1-10-large".parse::<Scenario>().is_err());
        assert_eq!(
            "table1-27-small".parse::<Scenario>().unwrap().engine_hints(),
            (99.99, 0.25)
        );
    }

    #[test]
    fn table1_shapes_and_density() {
        let d = simulate(
            Scenario::Table1 {
                support_len: 9,
                magnitude: 100.0,
            },
            1,
            20,
        )
        .unwrap();
        assert_eq!(d.train.len(), 2000);
        assert_eq!(d.measurements.len(), 20);
        assert!(d.supports.iter().all(|t| t.len() as f64 / 100.0 == 0.09));
        let diff = &d.measurements.matrix() - &(&d.l_true.matrix() + &d.s_true.matrix());
        assert!(diff.iter().all(|&x| x == 0.0));
        let again = simulate(d.scenario, 1, 20).unwrap();
        assert_eq!(again.measurements, d.measurements);
    }

    #[test]
    fn lake_like_shapes() {
        let d = simulate(Scenario::LakeLikeMotion, 0, 10).unwrap();
        assert_eq!(d.n(), LAKE_ROWS * LAKE_COLS);
        assert_eq!(d.supports.len(), 10);
        assert!(d.supports.iter().all(|t| t.len() == 22 * 12));
        let t = &d.supports[0];
        let s = d.s_true.frame(0);
        assert!(t.iter().all(|i| s[i] != 0.0));
        assert_eq!(s.iter().filter(|&&x| x != 0.0).count(), t.len());
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream_seed(0, 1), substream_seed(0, 2));
        assert_ne!(substream_seed(1, 1), substream_seed(0, 1));
    }
}
