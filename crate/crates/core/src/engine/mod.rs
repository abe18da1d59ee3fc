//! The online separation engine.
//!
//! Each frame is projected orthogonally to the current background subspace
//! estimate, the sparse part is recovered from the projection, and the
//! background estimate `L̂_t = M_t - Ŝ_t` feeds the subspace update every `α`
//! frames.

mod ppca;
mod rpca;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::linalg::{approx_basis_energy, BasisMatrix, ProjectorHandle, SingularSpectrum};
use crate::operator::{DenseOperator, LinearOperator, ProjectedOperator};
use crate::sparse::{
    least_squares_on_support, prune, solve_weighted_l1, support_overlap_policy, thresh, L1Problem,
    SolverConfig, SupportSet,
};

/// Factor on `|T̂_{t-1}|` used to size the candidate support.
pub const SUPPORT_GROWTH: f64 = 1.4;
/// Consecutive-estimate ratio below which projection PCA stops early.
pub const PPCA_STOP_RATIO: f64 = 0.01;

/// How the deletion threshold `ω` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// `ω = q sqrt(||M_t||^2 / n)`.
    #[default]
    FrameEnergy,
    /// `ω = q ||Φ_t L̂_{t-1}||_∞`, proportional to the noise seen by the ℓ1 step.
    /// Needs a different `q` per data set.
    ResidualMax,
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdRule::FrameEnergy => "energy",
            ThresholdRule::ResidualMax => "residual-max",
        })
    }
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(ThresholdRule::FrameEnergy),
            "residual-max" => Ok(ThresholdRule::ResidualMax),
            _ => Err(Error::Config(format!(
                "unknown threshold rule '{s}' (expected energy or residual-max)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    pub alpha: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub b_percent: f64,
    pub q: f64,
    pub threshold: ThresholdRule,
    pub solver: SolverConfig,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            alpha: 20,
            k_min: 3,
            k_max: 10,
            b_percent: 95.0,
            q: 1.0,
            threshold: ThresholdRule::FrameEnergy,
            solver: SolverConfig::default(),
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha == 0 {
            return Err(Error::Config("alpha must be at least 1".into()));
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::Config(format!(
                "need 1 <= kmin <= kmax, got kmin={} kmax={}",
                self.k_min, self.k_max
            )));
        }
        if !(self.b_percent > 0.0 && self.b_percent <= 100.0) {
            return Err(Error::Config(format!(
                "b_percent {} outside (0, 100]",
                self.b_percent
            )));
        }
        if !(self.q > 0.0) {
            return Err(Error::Config(format!("q must be positive, got {}", self.q)));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceMode {
    /// Change detection followed by projection PCA.
    Ppca,
    /// Incremental SVD with periodic rank truncation.
    RecursivePca,
}

impl fmt::Display for SubspaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubspaceMode::Ppca => "ppca",
            SubspaceMode::RecursivePca => "rpca",
        })
    }
}

impl FromStr for SubspaceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppca" => Ok(SubspaceMode::Ppca),
            "rpca" => Ok(SubspaceMode::RecursivePca),
            _ => Err(Error::Config(format!("unknown subspace mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Detect,
    Ppca,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Detect => "detect",
            Phase::Ppca => "ppca",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detect" => Ok(Phase::Detect),
            "ppca" => Ok(Phase::Ppca),
            _ => Err(Error::Format(format!("unknown phase '{s}'"))),
        }
    }
}

/// One detected subspace change.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent {
    pub j: usize,
    /// Estimated change frame `t̂_j`.
    pub t_hat: usize,
    /// Frame at which the change was detected.
    pub detected_at: usize,
    /// Frame at which projection PCA finished, with the number of steps taken.
    pub completed_at: Option<usize>,
    pub steps: Option<usize>,
    /// Number of directions in the final estimate.
    pub new_dims: usize,
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    /// 1-based frame index.
    pub t: usize,
    pub s_hat: Array1<f64>,
    pub support: SupportSet,
    /// `M_t - Ŝ_t`, or `M_t - AŜ_t` in compressive mode.
    pub l_hat: Array1<f64>,
    pub solver_converged: bool,
    pub weighted: bool,
    pub phase: Phase,
    /// Whether the subspace estimate changed at the end of this frame.
    pub subspace_updated: bool,
}

/// Mutable state of a running separation.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub(crate) params: EngineParams,
    pub(crate) mode: SubspaceMode,
    pub(crate) operator: Option<DenseOperator>,
    pub(crate) p_hat: BasisMatrix,
    pub(crate) p_prev_final: BasisMatrix,
    pub(crate) sigma0: SingularSpectrum,
    pub(crate) sigma_min: f64,
    pub(crate) r_hat: usize,
    pub(crate) phase: Phase,
    pub(crate) j: usize,
    pub(crate) k: usize,
    pub(crate) t: usize,
    pub(crate) t_train: usize,
    pub(crate) t_hat_j: usize,
    pub(crate) buffer: VecDeque<Array1<f64>>,
    pub(crate) t_prev1: SupportSet,
    pub(crate) t_prev2: SupportSet,
    pub(crate) l_prev: Array1<f64>,
    pub(crate) ppca_history: Vec<BasisMatrix>,
    pub(crate) p_tmp: BasisMatrix,
    pub(crate) sigma_tmp: SingularSpectrum,
    pub(crate) d: usize,
    pub(crate) events: Vec<ChangeEvent>,
}

impl EngineState {
    /// Estimate the initial subspace from sparse-free training frames.
    ///
    /// The training matrix is scaled by `1/sqrt(t_train)` before the energy
    /// cut, so `σ̂_min` is on the same scale as the `1/sqrt(α)`-scaled batches
    /// examined later.
    pub fn init(training: &FrameSequence, params: EngineParams, mode: SubspaceMode) -> Result<Self> {
        params.validate()?;
        if training.is_empty() || training.n() == 0 {
            return Err(Error::EmptyInput);
        }
        let t_train = training.len();
        let scaled = training.matrix().mapv(|x| x / (t_train as f64).sqrt());
        let (p0, sigma0) = approx_basis_energy(scaled.view(), params.b_percent)?;
        if p0.is_empty() {
            return Err(Error::ZeroEnergy);
        }
        let last = training.frame(t_train - 1).to_owned();
        EngineState::from_trained(p0, sigma0, last, t_train, params, mode)
    }

    /// Resume from a stored initial estimate: the basis `P̂_0`, its scaled
    /// singular values and the last training frame.
    pub fn from_trained(
        p0: BasisMatrix,
        sigma0: SingularSpectrum,
        last: Array1<f64>,
        t_train: usize,
        params: EngineParams,
        mode: SubspaceMode,
    ) -> Result<Self> {
        params.validate()?;
        if p0.is_empty() || t_train == 0 {
            return Err(Error::EmptyInput);
        }
        if sigma0.len() != p0.rank() {
            return Err(Error::dims(p0.rank(), sigma0.len()));
        }
        if last.len() != p0.n() {
            return Err(Error::dims(p0.n(), last.len()));
        }
        let r_hat = p0.rank();
        let sigma_min = sigma0.last().expect("nonempty spectrum");
        if !(sigma_min > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        let mut buffer = VecDeque::with_capacity(params.alpha);
        if mode == SubspaceMode::Ppca && params.alpha > 1 {
            buffer.push_back(last.clone());
        }
        Ok(EngineState {
            params,
            mode,
            operator: None,
            p_hat: p0.clone(),
            p_prev_final: p0.clone(),
            sigma_min,
            r_hat,
            phase: Phase::Detect,
            j: 0,
            k: 0,
            t: t_train,
            t_train,
            t_hat_j: t_train,
            buffer,
            t_prev1: SupportSet::empty(),
            t_prev2: SupportSet::empty(),
            l_prev: last,
            ppca_history: Vec::new(),
            p_tmp: p0,
            sigma_tmp: sigma0.clone(),
            sigma0,
            d: 3 * r_hat,
            events: Vec::new(),
        })
    }

    /// Switch to compressive measurements `M_t = A S_t + L̃_t`. The state must
    /// have been trained on `m`-dimensional frames, `m = A.rows()`.
    pub fn set_compressive(&mut self, a: DenseOperator) -> Result<()> {
        if a.rows() != self.dim() {
            return Err(Error::dims(self.dim(), a.rows()));
        }
        if a.cols() == 0 {
            return Err(Error::EmptyInput);
        }
        self.operator = Some(a);
        Ok(())
    }

    /// Separate one frame and advance the subspace tracker.
    pub fn process_frame(&mut self, m: ArrayView1<'_, f64>) -> Result<FrameResult> {
        if m.len() != self.dim() {
            return Err(Error::dims(self.dim(), m.len()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::OutOfRange("frame contains non-finite values".into()));
        }
        let t = self.t + 1;
        let phi = ProjectorHandle::new(self.p_hat.clone());
        let y = phi.apply(m);
        let beta_hat = phi.apply(self.l_prev.view());
        let xi = beta_hat.dot(&beta_hat).sqrt();
        let signal_len = self.signal_len();
        let energy = m.dot(&m);
        let omega = self.params.q
            * match self.params.threshold {
                ThresholdRule::FrameEnergy => (energy / signal_len as f64).sqrt(),
                ThresholdRule::ResidualMax => beta_hat.iter().fold(0.0f64, |a, x| a.max(x.abs())),
            };

        let recovery = if energy == 0.0 {
            Recovery {
                s_hat: Array1::zeros(signal_len),
                support: SupportSet::empty(),
                converged: true,
                weighted: false,
            }
        } else {
            match &self.operator {
                None => recover_sparse(
                    &phi,
                    y.view(),
                    xi,
                    &self.t_prev1,
                    &self.t_prev2,
                    omega,
                    &self.params.solver,
                )?,
                Some(a) => {
                    let op = ProjectedOperator::new(&phi, a)?;
                    recover_sparse(
                        &op,
                        y.view(),
                        xi,
                        &self.t_prev1,
                        &self.t_prev2,
                        omega,
                        &self.params.solver,
                    )?
                }
            }
        };

        let l_hat = match &self.operator {
            None => &m - &recovery.s_hat,
            Some(a) => &m - &a.apply(recovery.s_hat.view()),
        };

        self.t = t;
        self.t_prev2 = std::mem::replace(&mut self.t_prev1, recovery.support.clone());
        self.l_prev = l_hat.clone();
        if self.buffer.len() == self.params.alpha {
            self.buffer.pop_front();
        }
        self.buffer.push_back(l_hat.clone());

        let phase = self.phase;
        let subspace_updated = match self.mode {
            SubspaceMode::Ppca => ppca::update(self)?,
            SubspaceMode::RecursivePca => rpca::update(self)?,
        };

        Ok(FrameResult {
            t,
            s_hat: recovery.s_hat,
            support: recovery.support,
            l_hat,
            solver_converged: recovery.converged,
            weighted: recovery.weighted,
            phase,
            subspace_updated,
        })
    }

    /// Dimension of the incoming frames.
    pub fn dim(&self) -> usize {
        self.p_hat.n()
    }

    /// Length of the sparse vector (`n`, or the operator's column count).
    pub fn signal_len(&self) -> usize {
        self.operator.as_ref().map_or(self.dim(), |a| a.cols())
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn mode(&self) -> SubspaceMode {
        self.mode
    }

    pub fn operator(&self) -> Option<&DenseOperator> {
        self.operator.as_ref()
    }

    pub fn is_compressive(&self) -> bool {
        self.operator.is_some()
    }

    /// Current estimate `P̂_t`.
    pub fn basis(&self) -> &BasisMatrix {
        &self.p_hat
    }

    /// Estimate at the end of the last completed projection PCA, `P̂_(j)`.
    pub fn final_basis(&self) -> &BasisMatrix {
        &self.p_prev_final
    }

    /// Scaled training spectrum `Σ̂_0`.
    pub fn initial_spectrum(&self) -> &SingularSpectrum {
        &self.sigma0
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn r_hat(&self) -> usize {
        self.r_hat
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of detected changes.
    pub fn changes(&self) -> usize {
        self.j
    }

    /// Projection PCA step counter (meaningful only in the PPCA phase).
    pub fn ppca_step(&self) -> usize {
        self.k
    }

    /// Index of the last processed frame (1-based; `t_train` before any).
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn t_train(&self) -> usize {
        self.t_train
    }

    pub fn t_hat(&self) -> usize {
        self.t_hat_j
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn events(&self) -> &[ChangeEvent] {
        &self.events
    }

    /// Truncation cadence of recursive PCA.
    pub fn truncation_period(&self) -> usize {
        self.d
    }

    /// Running incremental SVD basis (recursive PCA).
    pub fn running_basis(&self) -> &BasisMatrix {
        &self.p_tmp
    }
}

struct Recovery {
    s_hat: Array1<f64>,
    support: SupportSet,
    converged: bool,
    weighted: bool,
}

/// ℓ1 or weighted ℓ1 followed by support estimation and least squares.
fn recover_sparse(
    op: &dyn LinearOperator,
    y: ArrayView1<'_, f64>,
    xi: f64,
    prev1: &SupportSet,
    prev2: &SupportSet,
    omega: f64,
    cfg: &SolverConfig,
) -> Result<Recovery> {
    let (weighted, lambda) = support_overlap_policy(prev2, prev1);
    let prob = if weighted {
        L1Problem::weighted(op, y, xi, prev1.clone(), lambda)
    } else {
        L1Problem::plain(op, y, xi)
    };
    let sol = solve_weighted_l1(&prob, cfg)?;
    let candidate = if weighted {
        let k = (SUPPORT_GROWTH * prev1.len() as f64).ceil() as usize;
        let t_add = prune(sol.x.view(), k);
        let (s_add, _) = ls_shrinking(op, y, t_add, sol.x.view())?;
        thresh(s_add.view(), omega)
    } else {
        thresh(sol.x.view(), omega)
    };
    let (s_hat, support) = ls_shrinking(op, y, candidate, sol.x.view())?;
    Ok(Recovery {
        s_hat,
        support,
        converged: sol.converged,
        weighted,
    })
}

/// Least squares on `support`, dropping the entries with the smallest
/// `|priority|` until the restricted columns are well conditioned.
fn ls_shrinking(
    op: &dyn LinearOperator,
    y: ArrayView1<'_, f64>,
    mut support: SupportSet,
    priority: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, SupportSet)> {
    if support.len() > op.rows() {
        let mut masked = Array1::zeros(priority.len());
        for i in support.iter() {
            // Keep every support entry ranked above the rest, even zeros.
            masked[i] = priority[i].abs() + f64::MIN_POSITIVE;
        }
        support = prune(masked.view(), op.rows());
    }
    loop {
        match least_squares_on_support(op, y, &support) {
            Ok(x) => return Ok((x, support)),
            Err(Error::IllConditioned) => {
                let weakest = *support
                    .indices()
                    .iter()
                    .rev()
                    .min_by(|&&a, &&b| priority[a].abs().total_cmp(&priority[b].abs()))
                    .expect("empty support is always conditioned");
                support = support.without(weakest);
            }
            Err(e) => return Err(e),
        }
    }
}
