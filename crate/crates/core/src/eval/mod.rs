//! Error metrics, model-verification series and the Monte-Carlo benchmark.

mod bench;

use std::io::Write;

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::linalg::{approx_basis_energy, BasisMatrix};
use crate::sparse::SupportSet;

pub use bench::{
    interval_means, realization_seed, run_benchmark, separate_simulated, thread_count, BenchConfig,
    BenchReport, RealizationResult, SimulatedRun, THREADS_ENV,
};

/// A per-frame series and its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub label: String,
    /// Index of the first entry of `per_frame` in the source sequence.
    pub start: usize,
    pub per_frame: Vec<f64>,
    pub aggregate: f64,
}

impl MetricReport {
    /// Report whose aggregate is the mean of the series (0 for an empty one).
    pub fn mean_of(label: impl Into<String>, start: usize, per_frame: Vec<f64>) -> Self {
        let aggregate = if per_frame.is_empty() {
            0.0
        } else {
            per_frame.iter().sum::<f64>() / per_frame.len() as f64
        };
        MetricReport {
            label: label.into(),
            start,
            per_frame,
            aggregate,
        }
    }

    pub fn len(&self) -> usize {
        self.per_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_frame.is_empty()
    }

    /// `(frame index, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.per_frame.iter().enumerate().map(|(i, &v)| (self.start + i, v))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_reports_csv(w, &[self])
    }
}

/// One CSV with a `t` column and one column per report; frames missing from a
/// report are left empty. `t` is the 0-based frame index.
pub fn write_reports_csv<W: Write>(w: W, reports: &[&MetricReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(reports.iter().map(|r| r.label.clone()));
    out.write_record(&header)?;
    let first = reports.iter().map(|r| r.start).min().unwrap_or(0);
    let last = reports.iter().map(|r| r.start + r.len()).max().unwrap_or(0);
    for t in first..last {
        let mut row = vec![t.to_string()];
        for r in reports {
            row.push(match t.checked_sub(r.start).and_then(|i| r.per_frame.get(i)) {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn check_same_shape(a: &FrameSequence, b: &FrameSequence) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::dims(a.n(), b.n()));
    }
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    Ok(())
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(||S_t - Ŝ_t||^2, ||S_t||^2)` for one frame. Every error total in the crate
/// is a frame-ordered sum of these, so streamed and in-memory totals agree
/// bit for bit.
pub fn frame_errors(s: ArrayView1<'_, f64>, s_hat: ArrayView1<'_, f64>) -> (f64, f64) {
    (sq_dist(s, s_hat), s.iter().map(|x| x * x).sum())
}

/// Summed `(||S - Ŝ||_F^2, ||S||_F^2)` of one realization.
pub fn error_energies(truth: &FrameSequence, est: &FrameSequence) -> Result<(f64, f64)> {
    check_same_shape(truth, est)?;
    Ok(truth
        .frames()
        .zip(est.frames())
        .map(|(s, s_hat)| frame_errors(s, s_hat))
        .fold((0.0, 0.0), |(e, p), (de, dp)| (e + de, p + dp)))
}

/// `sum ||S - Ŝ||_F^2 / sum ||S||_F^2` over realizations.
pub fn nmse_matrix(truth: &[FrameSequence], est: &[FrameSequence]) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(Error::dims(truth.len(), est.len()));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut err, mut energy) = (0.0, 0.0);
    for (s, s_hat) in truth.iter().zip(est) {
        let (e, p) = error_energies(s, s_hat)?;
        err += e;
        energy += p;
    }
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(err / energy)
}

/// `||S_t - Ŝ_t||^2 / ||S_t||^2` per frame; `0/0` counts as 0.
pub fn nmse_per_frame(truth: &FrameSequence, est: &FrameSequence) -> Result<MetricReport> {
    check_same_shape(truth, est)?;
    let series = truth
        .frames()
        .zip(est.frames())
        .map(|(s, s_hat)| {
            let (e, p) = frame_errors(s, s_hat);
            ratio(e, p)
        })
        .collect();
    Ok(MetricReport::mean_of("nmse", 0, series))
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `b%`-energy bases of consecutive windows of `τ` frames. A trailing partial
/// window is ignored.
pub fn window_bases(l: &FrameSequence, tau: usize, b_percent: f64) -> Result<Vec<BasisMatrix>> {
    if tau == 0 {
        return Err(Error::OutOfRange("window length must be at least 1".into()));
    }
    if l.len() < 2 * tau {
        return Err(Error::OutOfRange(format!(
            "need at least {} frames for windows of {tau}, got {}",
            2 * tau,
            l.len()
        )));
    }
    (0..l.len() / tau)
        .map(|j| {
            let w = l.matrix().slice_move(ndarray::s![.., j * tau..(j + 1) * tau]);
            approx_basis_energy(w, b_percent).map(|(p, _)| p)
        })
        .collect()
}

/// `||(I - P_(j-1) P_(j-1)') L_t|| / ||L_t||` for `t` in window `j >= 1`, where
/// `P_(j)` is the `b%`-energy basis of window `j`. Frames after the last full
/// window use the basis of the last full window.
pub fn verify_slow_subspace_change(l: &FrameSequence, tau: usize, b_percent: f64) -> Result<MetricReport> {
    let bases = window_bases(l, tau, b_percent)?;
    let series = (tau..l.len())
        .map(|t| {
            let j = (t / tau).min(bases.len());
            let p = &bases[j - 1];
            let v = l.frame(t);
            let resid = &v - &p.project(v);
            ratio(resid.dot(&resid).sqrt(), v.dot(&v).sqrt())
        })
        .collect();
    Ok(MetricReport::mean_of("subspace_change_ratio", tau, series))
}

/// `max_i ||I_T' p_i||` per frame, the largest norm of any basis column
/// restricted to the support.
pub fn verify_denseness(p: &BasisMatrix, supports: &[SupportSet]) -> Result<MetricReport> {
    let series = supports
        .iter()
        .map(|t| column_restriction_max(p, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MetricReport::mean_of("denseness", 0, series))
}

/// As [`verify_denseness`] with the basis of the window containing each frame.
pub fn verify_denseness_windows(
    bases: &[BasisMatrix],
    tau: usize,
    supports: &[SupportSet],
) -> Result<MetricReport> {
    if bases.is_empty() || tau == 0 {
        return Err(Error::EmptyInput);
    }
    let series = supports
        .iter()
        .enumerate()
        .map(|(t, s)| column_restriction_max(&bases[(t / tau).min(bases.len() - 1)], s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MetricReport::mean_of("denseness", 0, series))
}

fn column_restriction_max(p: &BasisMatrix, support: &SupportSet) -> Result<f64> {
    if let Some(bad) = support.iter().find(|&i| i >= p.n()) {
        return Err(Error::OutOfRange(format!(
            "support index {bad} outside ambient dimension {}",
            p.n()
        )));
    }
    let m = p.matrix();
    Ok(m.columns()
        .into_iter()
        .map(|c| support.iter().map(|i| c[i] * c[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// Support-change series: `|T_t|/n` for every frame and, from the second frame
/// on, `|Δ_t|/|T_t|` and `|Δ_e,t|/|T_t|` with `Δ_t = T_t \ T_{t-1}` and
/// `Δ_e,t = T_{t-1} \ T_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportDynamics {
    pub size: MetricReport,
    pub added: MetricReport,
    pub removed: MetricReport,
}

pub fn verify_support_dynamics(supports: &[SupportSet], n: usize) -> Result<SupportDynamics> {
    if supports.len() < 2 {
        return Err(Error::OutOfRange("need at least 2 supports".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let size = supports.iter().map(|t| t.len() as f64 / n as f64).collect();
    let (mut added, mut removed) = (Vec::new(), Vec::new());
    for w in supports.windows(2) {
        let len = w[1].len() as f64;
        added.push(ratio(w[1].difference_len(&w[0]) as f64, len));
        removed.push(ratio(w[0].difference_len(&w[1]) as f64, len));
    }
    Ok(SupportDynamics {
        size: MetricReport::mean_of("support_size", 0, size),
        added: MetricReport::mean_of("added_ratio", 1, added),
        removed: MetricReport::mean_of("removed_ratio", 1, removed),
    })
}

#[cfg(test)]
mod tests;
