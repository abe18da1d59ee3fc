//! Dense factorizations: one-sided Jacobi SVD, Householder QR and modified
//! Gram-Schmidt.
//!
//! Everything here is sequential and allocation-order deterministic, so a fixed
//! input produces bitwise identical output across runs on the same machine.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

const MAX_SWEEPS: usize = 80;

/// Left singular vectors and singular values of a dense matrix.
///
/// `u` is `rows x k` with orthonormal columns and `values` has length
/// `k = min(rows, cols)`, sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Array2<f64>,
    pub values: Vec<f64>,
}

/// Thin SVD returning left singular vectors only.
///
/// Wide inputs are first reduced with a QR factorization of the transpose so
/// the Jacobi sweeps run on a square `rows x rows` factor.
pub fn thin_svd(a: ArrayView2<'_, f64>) -> ThinSvd {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return ThinSvd {
            u: Array2::zeros((m, 0)),
            values: Vec::new(),
        };
    }
    let work = if n > m {
        // A' = Q R  =>  A = R' Q', and the left singular vectors of A are
        // those of R'.
        let (_, r) = householder_qr(a.t());
        r.t().to_owned()
    } else {
        a.to_owned()
    };
    let (mut u, mut values) = jacobi_left(work);
    sort_and_fix_signs(&mut u, &mut values);
    ThinSvd { u, values }
}

/// Singular values only.
pub fn singular_values(a: ArrayView2<'_, f64>) -> Vec<f64> {
    thin_svd(a).values
}

/// Largest singular value (spectral norm); zero for an empty matrix.
pub fn spectral_norm(a: ArrayView2<'_, f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// One-sided (Hestenes) Jacobi on the columns of a tall-or-square matrix.
fn jacobi_left(a: Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let (m, k) = a.dim();
    let tol = f64::EPSILON * (m as f64).max(1.0);
    // Work on the transpose so each column is a contiguous row.
    let mut cols: Vec<Vec<f64>> = a.columns().into_iter().map(|c| c.to_vec()).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k.saturating_sub(1) {
            for q in (p + 1)..k {
                let (head, tail) = cols.split_at_mut(q);
                let (xp, xq) = (&mut head[p], &mut tail[0]);
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (x, y) in xp.iter().zip(xq.iter()) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for (x, y) in xp.iter_mut().zip(xq.iter_mut()) {
                    let (xv, yv) = (*x, *y);
                    *x = c * xv - sn * yv;
                    *y = sn * xv + c * yv;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut a = Array2::<f64>::zeros((m, k));
    for (j, c) in cols.iter().enumerate() {
        a.column_mut(j).assign(&ndarray::ArrayView1::from(c.as_slice()));
    }

    let mut values = Vec::with_capacity(k);
    let mut zero_cols = Vec::new();
    for j in 0..k {
        let norm = a.column(j).dot(&a.column(j)).sqrt();
        values.push(norm);
        if norm > f64::MIN_POSITIVE {
            a.column_mut(j).mapv_inplace(|x| x / norm);
        } else {
            zero_cols.push(j);
        }
    }
    if !zero_cols.is_empty() {
        complete_columns(&mut a, &zero_cols);
    }
    (a, values)
}

/// Sort columns by nonincreasing singular value and force the largest-magnitude
/// entry of every column to be nonnegative.
fn sort_and_fix_signs(u: &mut Array2<f64>, values: &mut Vec<f64>) {
    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort keeps original column order among ties.
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let sorted_u = u.select(Axis(1), &order);
    let sorted_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    *u = sorted_u;
    *values = sorted_vals;
    fix_signs(u);
}

/// Sign convention: the largest-magnitude entry of each column is made
/// nonnegative (first index wins ties).
pub fn fix_signs(u: &mut Array2<f64>) {
    for mut col in u.columns_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = if x < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if sign < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// Replace the listed columns by unit vectors orthogonal to every other column,
/// drawn from the standard basis.
fn complete_columns(u: &mut Array2<f64>, targets: &[usize]) {
    let (m, k) = u.dim();
    let mut filled: Vec<usize> = (0..k).filter(|j| !targets.contains(j)).collect();
    let mut candidate = 0usize;
    for &t in targets {
        while candidate < m {
            let mut v = Array1::<f64>::zeros(m);
            v[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &j in &filled {
                    let c = u.column(j).dot(&v);
                    v.scaled_add(-c, &u.column(j));
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-8 {
                u.column_mut(t).assign(&(v / norm));
                filled.push(t);
                break;
            }
        }
    }
}

/// Householder QR of a matrix with `rows >= cols`; returns thin `Q` and square `R`.
///
/// For wide input the factorization still runs but `Q` is `rows x rows` and `R`
/// is `rows x cols`.
pub fn householder_qr(a: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    let kk = m.min(n);
    // Column-contiguous working copies.
    let mut rc: Vec<Vec<f64>> = a.columns().into_iter().map(|c| c.to_vec()).collect();
    let mut vs: Vec<Option<Vec<f64>>> = Vec::with_capacity(kk);
    for j in 0..kk {
        let x = &rc[j][j..];
        let norm_x = x.iter().map(|e| e * e).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            vs.push(None);
            continue;
        }
        let mut v = x.to_vec();
        let alpha = if v[0] >= 0.0 { -norm_x } else { norm_x };
        v[0] -= alpha;
        let vnorm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            vs.push(None);
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vnorm);
        for col in rc.iter_mut().skip(j) {
            reflect(&v, &mut col[j..]);
        }
        vs.push(Some(v));
    }
    // Accumulate thin Q by applying the reflectors to the leading identity columns.
    let mut qc: Vec<Vec<f64>> = (0..kk)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        })
        .collect();
    for j in (0..kk).rev() {
        if let Some(v) = &vs[j] {
            for col in qc.iter_mut() {
                reflect(v, &mut col[j..]);
            }
        }
    }
    let mut q = Array2::<f64>::zeros((m, kk));
    for (c, col) in qc.iter().enumerate() {
        q.column_mut(c).assign(&ndarray::ArrayView1::from(col.as_slice()));
    }
    let mut r = Array2::<f64>::zeros((m, n));
    for (c, col) in rc.iter().enumerate() {
        r.column_mut(c).assign(&ndarray::ArrayView1::from(col.as_slice()));
    }
    let mut r_out = r.slice(s![..kk, ..]).to_owned();
    for i in 0..kk {
        for c in 0..i.min(n) {
            r_out[(i, c)] = 0.0;
        }
    }
    (q, r_out)
}

/// `x <- (I - 2 v v') x` for unit `v`.
fn reflect(v: &[f64], x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    for (xi, vi) in x.iter_mut().zip(v.iter()) {
        *xi -= 2.0 * vi * dot;
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass, in place.
pub fn mgs_orthonormalize(q: &mut Array2<f64>) {
    let k = q.ncols();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let (left, mut right) = q.multi_slice_mut((s![.., i], s![.., j]));
                let c = left.dot(&right);
                right.scaled_add(-c, &left);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm > f64::MIN_POSITIVE {
            q.column_mut(j).mapv_inplace(|x| x / norm);
        }
    }
}

/// `max |Q'Q - I|` over all entries.
pub fn orthonormality_drift(q: ArrayView2<'_, f64>) -> f64 {
    let g = q.t().dot(&q);
    let mut worst = 0.0f64;
    for ((i, j), &v) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((v - target).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, n), |_| StandardNormal.sample(&mut rng))
    }

    fn reconstruct_gram(a: &Array2<f64>, svd: &ThinSvd) -> f64 {
        // A A' must equal U diag(s^2) U'.
        let aat = a.dot(&a.t());
        let mut us = svd.u.clone();
        for (j, mut col) in us.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|x| x * svd.values[j] * svd.values[j]);
        }
        let rec = us.dot(&svd.u.t());
        (&aat - &rec).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn diagonal_matrix() {
        let a = array![[5.0, 0.0], [0.0, 2.0]];
        let svd = thin_svd(a.view());
        assert_eq!(svd.values, vec![5.0, 2.0]);
        assert_eq!(svd.u, array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn tall_and_wide_agree_with_gram() {
        for (m, n, seed) in [(12, 5, 1), (5, 12, 2), (30, 30, 3), (3, 200, 4)] {
            let a = gaussian(m, n, seed);
            let svd = thin_svd(a.view());
            assert_eq!(svd.values.len(), m.min(n));
            assert!(orthonormality_drift(svd.u.view()) < 1e-12);
            let scale = svd.values[0] * svd.values[0];
            assert!(reconstruct_gram(&a, &svd) < 1e-12 * scale);
            assert!(svd.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_gets_completed_basis() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let svd = thin_svd(a.view());
        assert_eq!(svd.values, vec![1.0, 0.0, 0.0]);
        assert!(orthonormality_drift(svd.u.view()) < 1e-14);
    }

    #[test]
    fn sign_convention() {
        let a = array![[-3.0], [1.0]];
        let svd = thin_svd(a.view());
        assert!(svd.u[(0, 0)] > 0.0);
    }

    #[test]
    fn qr_reconstructs() {
        let a = gaussian(9, 4, 7);
        let (q, r) = householder_qr(a.view());
        assert!(orthonormality_drift(q.view()) < 1e-13);
        let rec = q.dot(&r);
        assert!((&rec - &a).iter().all(|x| x.abs() < 1e-12));
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn mgs_restores_orthonormality() {
        let mut q = gaussian(10, 4, 11);
        mgs_orthonormalize(&mut q);
        assert!(orthonormality_drift(q.view()) < 1e-14);
    }

    #[test]
    fn deterministic() {
        let a = gaussian(20, 50, 5);
        let x = thin_svd(a.view());
        let y = thin_svd(a.view());
        assert_eq!(x.values, y.values);
        assert_eq!(x.u, y.u);
    }
}
