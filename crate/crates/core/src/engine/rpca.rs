use ndarray::Array2;

use super::EngineState;
use crate::error::Result;
use crate::linalg::inc_svd;

/// Incremental SVD every `α` frames and rank truncation every `d` frames,
/// both counted from the end of training. Batches are scaled by `1/sqrt(α)`
/// to match the scaling of the training spectrum.
pub(super) fn update(st: &mut EngineState) -> Result<bool> {
    let alpha = st.params.alpha;
    let elapsed = st.t - st.t_train;
    let mut updated = false;
    if elapsed.is_multiple_of(alpha) && st.buffer.len() == alpha {
        let scale = 1.0 / (alpha as f64).sqrt();
        let mut batch = Array2::<f64>::zeros((st.dim(), alpha));
        for (c, l) in st.buffer.iter().enumerate() {
            batch.column_mut(c).assign(&l.mapv(|x| x * scale));
        }
        let (p, sigma) = inc_svd(&st.p_tmp, &st.sigma_tmp, batch.view())?;
        st.p_tmp = p;
        st.sigma_tmp = sigma;
        st.p_hat = st.p_tmp.leading(st.r_hat);
        updated = true;
    }
    if st.d > 0 && elapsed.is_multiple_of(st.d) {
        st.p_tmp = st.p_tmp.leading(st.r_hat);
        st.sigma_tmp = st.sigma_tmp.leading(st.r_hat);
    }
    Ok(updated)
}
