use ndarray::{Array1, Array2, ArrayView1};

use super::SupportSet;
use crate::error::{Error, Result};
use crate::linalg::svd::{householder_qr, singular_values};
use crate::operator::LinearOperator;

/// Columns of `Φ_T` whose smallest singular value falls below this fraction of
/// the largest are rejected as ill-conditioned.
pub const LS_CONDITION_LIMIT: f64 = 1e-8;

/// Least squares restricted to `support`: `x_T = (Φ_T'Φ_T)^{-1} Φ_T' y`,
/// zero elsewhere.
pub fn least_squares_on_support(
    phi: &dyn LinearOperator,
    y: ArrayView1<'_, f64>,
    support: &SupportSet,
) -> Result<Array1<f64>> {
    if y.len() != phi.rows() {
        return Err(Error::dims(phi.rows(), y.len()));
    }
    let mut x = Array1::zeros(phi.cols());
    if support.is_empty() {
        return Ok(x);
    }
    if support.indices().last().is_some_and(|&i| i >= phi.cols()) {
        return Err(Error::OutOfRange("support index outside operator".into()));
    }
    if support.len() > phi.rows() {
        return Err(Error::IllConditioned);
    }
    let a = phi.columns(support.indices());
    if !well_conditioned(&a) {
        return Err(Error::IllConditioned);
    }
    let coeffs = solve_full_rank(&a, y);
    for (k, i) in support.iter().enumerate() {
        x[i] = coeffs[k];
    }
    Ok(x)
}

pub(crate) fn well_conditioned(a: &Array2<f64>) -> bool {
    let sv = singular_values(a.view());
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) => hi > 0.0 && lo > LS_CONDITION_LIMIT * hi,
        _ => true,
    }
}

/// QR-based solve of a tall full-column-rank least squares problem.
pub(crate) fn solve_full_rank(a: &Array2<f64>, y: ArrayView1<'_, f64>) -> Array1<f64> {
    let (q, r) = householder_qr(a.view());
    let qty = q.t().dot(&y);
    back_substitute(&r, qty)
}

pub(crate) fn back_substitute(r: &Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
    let k = r.ncols();
    for i in (0..k).rev() {
        let mut v = b[i];
        for j in (i + 1)..k {
            v -= r[(i, j)] * b[j];
        }
        b[i] = v / r[(i, i)];
    }
    b
}

/// Solve `R' z = b` for upper-triangular `R`.
pub(crate) fn forward_substitute_transpose(r: &Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
    let k = r.ncols();
    for i in 0..k {
        let mut v = b[i];
        for j in 0..i {
            v -= r[(j, i)] * b[j];
        }
        b[i] = v / r[(i, i)];
    }
    b
}
