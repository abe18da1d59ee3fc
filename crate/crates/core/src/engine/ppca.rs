use ndarray::{s, Array1, Array2};

use super::{ChangeEvent, EngineState, Phase, PPCA_STOP_RATIO};
use crate::error::Result;
use crate::linalg::svd::{mgs_orthonormalize, thin_svd};
use crate::linalg::BasisMatrix;

/// Change detection and projection PCA, run when
/// `(t - t̂_j + 1) mod α == 0`. Returns whether `P̂_t` changed.
pub(super) fn update(st: &mut EngineState) -> Result<bool> {
    let alpha = st.params.alpha;
    if !(st.t + 1 - st.t_hat_j).is_multiple_of(alpha) || st.buffer.len() < alpha {
        return Ok(false);
    }
    if st.phase == Phase::Detect {
        let (values, _) = projected_svd(st);
        if !values.iter().any(|&v| v > st.sigma_min) {
            return Ok(false);
        }
        st.phase = Phase::Ppca;
        st.j += 1;
        st.t_hat_j = st.t + 1 - alpha;
        st.k = 1;
        st.ppca_history.clear();
        st.events.push(ChangeEvent {
            j: st.j,
            t_hat: st.t_hat_j,
            detected_at: st.t,
            completed_at: None,
            steps: None,
            new_dims: 0,
        });
        // The same batch now satisfies the cadence for the first p-PCA step.
    }
    ppca_step(st)?;
    Ok(true)
}

/// SVD of `(1/sqrt(α)) (I - P̂_(j-1) P̂_(j-1)') [L̂_{t-α+1} .. L̂_t]`.
fn projected_svd(st: &EngineState) -> (Vec<f64>, Array2<f64>) {
    let n = st.dim();
    let alpha = st.params.alpha;
    let scale = 1.0 / (alpha as f64).sqrt();
    let p = st.p_prev_final.matrix();
    let mut x = Array2::<f64>::zeros((n, alpha));
    for (c, l) in st.buffer.iter().enumerate() {
        x.column_mut(c).assign(l);
    }
    let coeffs = p.t().dot(&x);
    x -= &p.dot(&coeffs);
    x.mapv_inplace(|v| v * scale);
    let svd = thin_svd(x.view());
    (svd.values, svd.u)
}

fn ppca_step(st: &mut EngineState) -> Result<()> {
    let alpha = st.params.alpha;
    let (values, u) = projected_svd(st);
    let room = st.dim() - st.p_prev_final.rank();
    let c = values
        .iter()
        .filter(|&&v| v > st.sigma_min)
        .count()
        .min(alpha.div_ceil(3))
        .min(room);
    let mut new = u.slice(s![.., ..c]).to_owned();
    if c > 0 {
        // Remove round-off leakage into the old span before concatenating.
        let p = st.p_prev_final.matrix();
        let back = p.t().dot(&new);
        new -= &p.dot(&back);
        mgs_orthonormalize(&mut new);
    }
    let p_new = BasisMatrix::from_trusted(new);
    st.p_hat = st.p_prev_final.concat(&p_new)?;
    st.ppca_history.push(p_new);
    st.k += 1;

    let done = st.ppca_history.len();
    let k_max = st.params.k_max;
    let k_min = st.params.k_min.max(3);
    let converged = done >= k_min && {
        let v = buffer_sum(st);
        let h = &st.ppca_history;
        (done - 2..done).all(|i| estimate_ratio(&h[i - 1], &h[i], &v) < PPCA_STOP_RATIO)
    };
    if converged || done >= k_max {
        st.p_prev_final = st.p_hat.clone();
        st.phase = Phase::Detect;
        let t = st.t;
        if let Some(ev) = st.events.last_mut() {
            ev.completed_at = Some(t);
            ev.steps = Some(done);
            ev.new_dims = st.ppca_history.last().map_or(0, |b| b.rank());
        }
        st.k = 0;
        st.ppca_history.clear();
    }
    Ok(())
}

fn buffer_sum(st: &EngineState) -> Array1<f64> {
    let mut v = Array1::zeros(st.dim());
    for l in &st.buffer {
        v += l;
    }
    v
}

/// `||(P_a P_a' - P_b P_b') v|| / ||P_a P_a' v||`.
pub(crate) fn estimate_ratio(pa: &BasisMatrix, pb: &BasisMatrix, v: &Array1<f64>) -> f64 {
    let proj_a = pa.project(v.view());
    let diff = &proj_a - &pb.project(v.view());
    let num = diff.dot(&diff).sqrt();
    let den = proj_a.dot(&proj_a).sqrt();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}
