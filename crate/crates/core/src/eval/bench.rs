use std::io::Write;
use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;

use super::{error_energies, nmse_per_frame};
use crate::datagen::{gen_gaussian_operator, simulate, substream_seed, Scenario, SimulatedData, TABLE1_POST};
use crate::engine::{EngineParams, EngineState, SubspaceMode};
use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::linalg::subspace_error;
use crate::operator::{DenseOperator, LinearOperator};

/// Caps the number of worker threads used for realizations.
pub const THREADS_ENV: &str = "REPROCS_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scenario: Scenario,
    pub realizations: usize,
    /// Realization `i` uses data seed `seed + i`.
    pub seed: u64,
    pub post_frames: usize,
    pub mode: SubspaceMode,
    /// Defaults to [`Scenario::engine_hints`] on top of [`EngineParams::default`].
    pub params: Option<EngineParams>,
    /// Measurement ratio `m/n` for compressive runs with a Gaussian operator.
    pub compression: Option<f64>,
    /// Worker threads; `None` defers to the environment, then to rayon.
    pub threads: Option<usize>,
}

impl BenchConfig {
    pub fn new(scenario: Scenario) -> Self {
        BenchConfig {
            scenario,
            realizations: 10,
            seed: 0,
            post_frames: TABLE1_POST,
            mode: SubspaceMode::Ppca,
            params: None,
            compression: None,
            threads: None,
        }
    }

    pub fn engine_params(&self) -> EngineParams {
        self.params.unwrap_or_else(|| {
            let (b_percent, q) = self.scenario.engine_hints();
            EngineParams {
                b_percent,
                q,
                ..EngineParams::default()
            }
        })
    }
}

pub fn realization_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Diagnostics of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub index: usize,
    pub seed: u64,
    pub err_energy: f64,
    pub signal_energy: f64,
    pub nmse: f64,
    pub nmse_per_frame: Vec<f64>,
    /// Fraction of frames with `T̂_t = T_t`.
    pub exact_support_rate: f64,
    /// `||(I - P̂_{t-1} P̂_{t-1}') L_t||` with the true `L_t` (`A L_t` when compressive).
    pub beta: Vec<f64>,
    /// Means of `beta` over the projection-PCA intervals `k = 1, 2, ...`.
    pub beta_interval_means: Vec<f64>,
    pub detected_at: Option<usize>,
    /// `detected_at - t_change`.
    pub detection_delay: Option<i64>,
    pub ppca_steps: Option<usize>,
    pub completed_at: Option<usize>,
    /// `SE([P_0 P_new], P̂)` at the end of the run; not defined in compressive mode.
    pub final_se: Option<f64>,
    /// `SE(P_new, P̂)` at the end of the run.
    pub se_new: Option<f64>,
    pub final_rank: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub results: Vec<RealizationResult>,
    /// Monte-Carlo NMSE: summed error energy over summed signal energy.
    pub nmse: f64,
    pub exact_support_rate: f64,
    pub elapsed_secs: f64,
}

pub fn thread_count(explicit: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = explicit {
        return Ok(Some(t.max(1)));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|t| Some(t.max(1)))
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

/// Run `realizations` independent simulations in parallel. Results are
/// collected in realization order, so reductions do not depend on scheduling.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.realizations == 0 {
        return Err(Error::OutOfRange("realizations must be at least 1".into()));
    }
    if cfg.post_frames == 0 {
        return Err(Error::OutOfRange("post_frames must be at least 1".into()));
    }
    if let Some(r) = cfg.compression {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::OutOfRange(format!("compression ratio {r} outside (0, 1]")));
        }
    }
    let params = cfg.engine_params();
    params.validate()?;
    let start = Instant::now();
    let job = || {
        (0..cfg.realizations)
            .into_par_iter()
            .map(|i| run_realization(cfg, params, i))
            .collect::<Result<Vec<_>>>()
    };
    let results = match thread_count(cfg.threads)? {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(job)?,
        None => job()?,
    };
    let err: f64 = results.iter().map(|r| r.err_energy).sum();
    let energy: f64 = results.iter().map(|r| r.signal_energy).sum();
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let exact = results.iter().map(|r| r.exact_support_rate).sum::<f64>() / results.len() as f64;
    Ok(BenchReport {
        config: cfg.clone(),
        nmse: err / energy,
        exact_support_rate: exact,
        elapsed_secs: start.elapsed().as_secs_f64(),
        results,
    })
}

fn run_realization(cfg: &BenchConfig, params: EngineParams, index: usize) -> Result<RealizationResult> {
    let seed = realization_seed(cfg.seed, index);
    let started = Instant::now();
    let data = simulate(cfg.scenario, seed, cfg.post_frames)?;
    let operator = match cfg.compression {
        Some(ratio) => {
            let m = ((ratio * data.n() as f64).round() as usize).max(1);
            Some(gen_gaussian_operator(m, data.n(), substream_seed(seed, 3), false)?)
        }
        None => None,
    };
    let out = separate_simulated(&data, params, cfg.mode, operator.as_ref())?;
    let (err_energy, signal_energy) = error_energies(&data.s_true, &out.s_hat)?;
    let per_frame = nmse_per_frame(&data.s_true, &out.s_hat)?;
    let exact = out
        .supports
        .iter()
        .zip(&data.supports)
        .filter(|(a, b)| a == b)
        .count() as f64
        / data.supports.len() as f64;

    let event = out.state.events().first().cloned();
    let alpha = params.alpha;
    let beta_interval_means = match &event {
        Some(ev) => interval_means(&out.beta, data.t_train, ev.t_hat, alpha, ev.steps),
        None => Vec::new(),
    };
    let (final_se, se_new) = if operator.is_some() {
        (None, None)
    } else {
        let p_hat = out.state.basis();
        let full = data.p0.concat(&data.p_new)?;
        (
            Some(subspace_error(&full, p_hat)?),
            Some(subspace_error(&data.p_new, p_hat)?),
        )
    };
    Ok(RealizationResult {
        index,
        seed,
        err_energy,
        signal_energy,
        nmse: if signal_energy == 0.0 { 0.0 } else { err_energy / signal_energy },
        nmse_per_frame: per_frame.per_frame,
        exact_support_rate: exact,
        beta_interval_means,
        beta: out.beta,
        detected_at: event.as_ref().map(|e| e.detected_at),
        detection_delay: event
            .as_ref()
            .map(|e| e.detected_at as i64 - data.t_change as i64),
        ppca_steps: event.as_ref().and_then(|e| e.steps),
        completed_at: event.as_ref().and_then(|e| e.completed_at),
        final_se,
        se_new,
        final_rank: out.state.basis().rank(),
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Output of [`separate_simulated`].
#[derive(Debug, Clone)]
pub struct SimulatedRun {
    pub s_hat: FrameSequence,
    pub supports: Vec<crate::sparse::SupportSet>,
    pub beta: Vec<f64>,
    pub state: EngineState,
}

/// Train on the sparse-free prefix and separate every post-training frame.
/// With an operator, training frames and measurements are compressed first.
pub fn separate_simulated(
    data: &SimulatedData,
    params: EngineParams,
    mode: SubspaceMode,
    operator: Option<&DenseOperator>,
) -> Result<SimulatedRun> {
    let compress = |seq: &FrameSequence| match operator {
        Some(a) => FrameSequence::new(a.matrix().dot(&seq.matrix())),
        None => seq.clone(),
    };
    let mut state = EngineState::init(&compress(&data.train), params, mode)?;
    if let Some(a) = operator {
        state.set_compressive(a.clone())?;
    }
    let measured_l = compress(&data.l_true);
    let n = data.n();
    let frames = data.measurements.len();
    let mut s_hat = ndarray::Array2::zeros((n, frames));
    let mut supports = Vec::with_capacity(frames);
    let mut beta = Vec::with_capacity(frames);
    for t in 0..frames {
        let l = measured_l.frame(t);
        let resid: Array1<f64> = &l - &state.basis().project(l);
        beta.push(resid.dot(&resid).sqrt());
        let m = match operator {
            Some(a) => a.apply(data.measurements.frame(t)),
            None => data.measurements.frame(t).to_owned(),
        };
        let r = state.process_frame(m.view())?;
        s_hat.column_mut(t).assign(&r.s_hat);
        supports.push(r.support);
    }
    Ok(SimulatedRun {
        s_hat: FrameSequence::new(s_hat),
        supports,
        beta,
        state,
    })
}

/// Mean of `beta` over `[t̂ + (k-1)α, t̂ + kα - 1]` for each step `k` whose
/// interval has ended within the run, capped at `steps` when p-PCA finished.
/// `beta[i]` belongs to frame `t_train + 1 + i`.
pub fn interval_means(
    beta: &[f64],
    t_train: usize,
    t_hat: usize,
    alpha: usize,
    steps: Option<usize>,
) -> Vec<f64> {
    let last_frame = t_train + beta.len();
    let mut out = Vec::new();
    for k in 1.. {
        if steps.is_some_and(|s| k > s) {
            break;
        }
        let lo = (t_hat + (k - 1) * alpha).max(t_train + 1);
        let hi = t_hat + k * alpha - 1;
        if hi > last_frame {
            break;
        }
        if lo > hi {
            continue;
        }
        let vals = &beta[lo - t_train - 1..=hi - t_train - 1];
        out.push(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    out
}

impl BenchReport {
    /// Per-step interval means of `beta` averaged over the realizations that
    /// reached that step.
    pub fn beta_means_by_step(&self) -> Vec<f64> {
        let steps = self
            .results
            .iter()
            .map(|r| r.beta_interval_means.len())
            .max()
            .unwrap_or(0);
        (0..steps)
            .map(|k| {
                let vals: Vec<f64> = self
                    .results
                    .iter()
                    .filter_map(|r| r.beta_interval_means.get(k).copied())
                    .collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect()
    }

    pub fn mean_elapsed_secs(&self) -> f64 {
        self.results.iter().map(|r| r.elapsed_secs).sum::<f64>() / self.results.len() as f64
    }

    /// One-line summary: scenario, realizations, NMSE, exact-support rate and
    /// wall time.
    pub fn table_row(&self) -> String {
        format!(
            "{} realizations={} nmse={:.4e} exact_support={:.3} time={:.2}s",
            self.config.scenario,
            self.results.len(),
            self.nmse,
            self.exact_support_rate,
            self.elapsed_secs
        )
    }

    pub const CSV_HEADER: [&'static str; 15] = [
        "scenario",
        "realization",
        "seed",
        "nmse",
        "err_energy",
        "signal_energy",
        "exact_support_rate",
        "detected_at",
        "detection_delay",
        "ppca_steps",
        "completed_at",
        "final_se",
        "se_new",
        "beta_interval_means",
        "elapsed_secs",
    ];

    /// One row per realization.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        for r in &self.results {
            let beta: Vec<String> = r.beta_interval_means.iter().map(f64::to_string).collect();
            out.write_record([
                self.config.scenario.to_string(),
                r.index.to_string(),
                r.seed.to_string(),
                r.nmse.to_string(),
                r.err_energy.to_string(),
                r.signal_energy.to_string(),
                r.exact_support_rate.to_string(),
                opt(r.detected_at),
                opt(r.detection_delay),
                opt(r.ppca_steps),
                opt(r.completed_at),
                opt(r.final_se),
                opt(r.se_new),
                beta.join(" "),
                r.elapsed_secs.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// One row per realization and frame: `nmse` and `beta`.
    pub fn write_frames_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["realization", "t", "nmse", "beta"])?;
        for r in &self.results {
            for (i, (e, b)) in r.nmse_per_frame.iter().zip(&r.beta).enumerate() {
                let t = self.t_train() + 1 + i;
                out.write_record([r.index.to_string(), t.to_string(), e.to_string(), b.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    fn t_train(&self) -> usize {
        match self.config.scenario {
            Scenario::Table1 { .. } => crate::datagen::TABLE1_TRAIN,
            Scenario::LakeLikeMotion => crate::datagen::LAKE_TRAIN,
        }
    }
}
