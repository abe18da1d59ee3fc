use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::linalg::svd::householder_qr;
use crate::linalg::BasisMatrix;

/// Variance below which a decaying direction is removed from the model.
pub const REMOVAL_VARIANCE: f64 = 1e-6;

/// Low-rank autoregressive background with one subspace change.
///
/// Time indices are 1-based: frames `1..=t_train` are the training period and
/// the change happens at frame `t_change`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankConfig {
    pub n: usize,
    pub r0: usize,
    pub c_new: usize,
    pub t_train: usize,
    pub t_change: usize,
    pub ar_coeff: f64,
    pub decay: f64,
    /// Stationary variance of each of the `r0` initial directions.
    pub variance_profile: Vec<f64>,
    /// Variances of the `c_new` added directions.
    pub new_variances: Vec<f64>,
    /// How many existing directions start decaying at the change time.
    pub decaying: usize,
    pub seed: u64,
}

/// `start * ratio^i` for `i = 0..count`.
pub fn geometric_profile(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start * ratio.powi(i as i32)).collect()
}

impl Default for LowRankConfig {
    fn default() -> Self {
        LowRankConfig {
            n: 100,
            r0: 20,
            c_new: 2,
            t_train: 2000,
            t_change: 2005,
            ar_coeff: 0.1,
            decay: 0.1,
            variance_profile: geometric_profile(1e4, 0.7079, 20),
            new_variances: vec![60.0, 50.0],
            decaying: 2,
            seed: 0,
        }
    }
}

impl LowRankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r0 + self.c_new > self.n {
            return Err(Error::Config(format!(
                "r0 + c_new = {} exceeds n = {}",
                self.r0 + self.c_new,
                self.n
            )));
        }
        if self.c_new > 0 && self.t_change <= self.t_train {
            return Err(Error::Config("change time must follow training".into()));
        }
        if self.variance_profile.len() != self.r0 {
            return Err(Error::Config(format!(
                "variance profile has {} entries for r0 = {}",
                self.variance_profile.len(),
                self.r0
            )));
        }
        if self.new_variances.len() != self.c_new {
            return Err(Error::Config(format!(
                "{} new variances for c_new = {}",
                self.new_variances.len(),
                self.c_new
            )));
        }
        if self.decaying > self.r0 {
            return Err(Error::Config("more decaying directions than r0".into()));
        }
        if !(0.0..1.0).contains(&self.ar_coeff.abs()) {
            return Err(Error::Config("|ar_coeff| must be < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LowRankOutput {
    /// `L_1 .. L_T`.
    pub l: FrameSequence,
    /// Initial basis `P_0` (`n x r0`).
    pub p0: BasisMatrix,
    /// Added directions (`n x c_new`).
    pub p_new: BasisMatrix,
    /// Column indices of `p0` that decay after the change.
    pub decaying: Vec<usize>,
    /// Per decaying direction, the 1-based frame from which it is removed.
    pub removed_at: Vec<Option<usize>>,
}

impl LowRankOutput {
    /// `[P_0 P_new]`.
    pub fn full_basis(&self) -> BasisMatrix {
        self.p0.concat(&self.p_new).expect("same ambient dimension")
    }
}

/// First `k` columns of an `n x n` Haar-random orthonormal matrix.
///
/// Only the first `k` Gaussian columns influence those columns of `Q`, so only
/// they are drawn.
pub fn random_orthonormal(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = Array2::from_shape_fn((n, k), |_| StandardNormal.sample(rng));
    let (mut q, r) = householder_qr(g.view());
    // Sign-fix so the distribution is Haar rather than QR-convention dependent.
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).mapv_inplace(|x| -x);
        }
    }
    q
}

/// Generate `L_t = P_t a_t` for `t = 1..=frames`.
///
/// Each coefficient follows a scalar AR(1) recursion whose innovation variance
/// keeps the stationary variance at its configured value. At `t_change` the new
/// directions switch on and the `decaying` smallest-variance initial directions
/// start decaying exponentially at rate `decay`; once their variance drops below
/// [`REMOVAL_VARIANCE`] they are removed.
pub fn gen_lowrank_ar(cfg: &LowRankConfig, frames: usize) -> Result<LowRankOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total_dirs = cfg.r0 + cfg.c_new;
    let basis = random_orthonormal(cfg.n, total_dirs, &mut rng);

    let mut by_var: Vec<usize> = (0..cfg.r0).collect();
    by_var.sort_by(|&a, &b| {
        cfg.variance_profile[a]
            .total_cmp(&cfg.variance_profile[b])
            .then(b.cmp(&a))
    });
    let mut decaying: Vec<usize> = by_var[..cfg.decaying].to_vec();
    decaying.sort_unstable();
    let mut removed_at = vec![None; decaying.len()];

    let innovation_scale = (1.0 - cfg.ar_coeff * cfg.ar_coeff).sqrt();
    let mut coeff: Array1<f64> = Array1::zeros(total_dirs);
    for i in 0..cfg.r0 {
        let z: f64 = StandardNormal.sample(&mut rng);
        coeff[i] = cfg.variance_profile[i].sqrt() * z;
    }

    let mut l = Array2::<f64>::zeros((cfg.n, frames));
    for t in 1..=frames {
        for i in 0..total_dirs {
            let z: f64 = StandardNormal.sample(&mut rng);
            let var = if i < cfg.r0 {
                let base = cfg.variance_profile[i];
                match decaying.iter().position(|&d| d == i) {
                    Some(k) if cfg.c_new + cfg.decaying > 0 && t >= cfg.t_change => {
                        let v = base * (-cfg.decay * (t - cfg.t_change + 1) as f64).exp();
                        if v < REMOVAL_VARIANCE {
                            removed_at[k].get_or_insert(t);
                            0.0
                        } else {
                            v
                        }
                    }
                    _ => base,
                }
            } else if t >= cfg.t_change {
                cfg.new_variances[i - cfg.r0]
            } else {
                0.0
            };
            coeff[i] = if var == 0.0 {
                0.0
            } else {
                cfg.ar_coeff * coeff[i] + innovation_scale * var.sqrt() * z
            };
        }
        l.column_mut(t - 1).assign(&basis.dot(&coeff));
    }

    Ok(LowRankOutput {
        l: FrameSequence::new(l),
        p0: BasisMatrix::from_trusted(basis.slice(s![.., ..cfg.r0]).to_owned()),
        p_new: BasisMatrix::from_trusted(basis.slice(s![.., cfg.r0..]).to_owned()),
        decaying,
        removed_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::approx_basis_energy;

    #[test]
    fn zero_variance_is_zero_signal() {
        let cfg = LowRankConfig {
            n: 10,
            r0: 3,
            c_new: 1,
            t_train: 5,
            t_change: 7,
            variance_profile: vec![0.0; 3],
            new_variances: vec![0.0],
            decaying: 0,
            ..LowRankConfig::default()
        };
        let out = gen_lowrank_ar(&cfg, 20).unwrap();
        assert!(out.l.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn white_coordinate_has_unit_variance() {
        let cfg = LowRankConfig {
            n: 5,
            r0: 1,
            c_new: 0,
            t_train: 10,
            t_change: 11,
            ar_coeff: 0.0,
            variance_profile: vec![1.0],
            new_variances: vec![],
            decaying: 0,
            seed: 9,
            ..LowRankConfig::default()
        };
        let out = gen_lowrank_ar(&cfg, 10_000).unwrap();
        let coeffs = out.p0.matrix().t().dot(&out.l.matrix());
        let var = coeffs.iter().map(|c| c * c).sum::<f64>() / 10_000.0;
        assert!((var - 1.0).abs() < 0.1, "empirical variance {var}");
    }

    #[test]
    fn default_training_rank_is_twenty() {
        let cfg = LowRankConfig {
            seed: 1,
            ..LowRankConfig::default()
        };
        let out = gen_lowrank_ar(&cfg, cfg.t_train).unwrap();
        let (q, _) = approx_basis_energy(out.l.matrix(), 99.99).unwrap();
        assert_eq!(q.rank(), 20);
    }

    #[test]
    fn profile_endpoints() {
        let p = geometric_profile(1e4, 0.7079, 20);
        assert_eq!(p[0], 1e4);
        assert!((p[19] - 14.13).abs() < 0.05);
    }

    #[test]
    fn decaying_directions_are_removed() {
        let cfg = LowRankConfig {
            n: 30,
            r0: 5,
            c_new: 1,
            t_train: 20,
            t_change: 25,
            decay: 0.5,
            variance_profile: geometric_profile(100.0, 0.5, 5),
            new_variances: vec![10.0],
            seed: 4,
            ..LowRankConfig::default()
        };
        let out = gen_lowrank_ar(&cfg, 120).unwrap();
        assert_eq!(out.decaying, vec![3, 4]);
        assert!(out.removed_at.iter().all(|r| r.is_some()));
        // After removal the coefficient along a removed direction is zero.
        let last = out.l.frame(119);
        for &d in &out.decaying {
            let c = out.p0.matrix().column(d).dot(&last);
            assert!(c.abs() < 1e-10);
        }
    }

    #[test]
    fn reproducible() {
        let cfg = LowRankConfig {
            n: 20,
            r0: 4,
            c_new: 1,
            t_train: 10,
            t_change: 12,
            variance_profile: vec![4.0, 3.0, 2.0, 1.0],
            new_variances: vec![1.0],
            seed: 77,
            ..LowRankConfig::default()
        };
        let a = gen_lowrank_ar(&cfg, 50).unwrap();
        let b = gen_lowrank_ar(&cfg, 50).unwrap();
        assert_eq!(a.l, b.l);
    }
}
