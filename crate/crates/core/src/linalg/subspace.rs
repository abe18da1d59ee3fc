use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::svd::{singular_values, spectral_norm};
use super::BasisMatrix;
use crate::error::{Error, Result};

/// The perpendicular projector `I - QQ'` for a basis `Q`, applied matrix-free.
#[derive(Debug, Clone)]
pub struct ProjectorHandle {
    basis: BasisMatrix,
}

impl ProjectorHandle {
    pub fn new(basis: BasisMatrix) -> Self {
        ProjectorHandle { basis }
    }

    pub fn identity(n: usize) -> Self {
        ProjectorHandle {
            basis: BasisMatrix::empty(n),
        }
    }

    pub fn basis(&self) -> &BasisMatrix {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    /// `v - Q(Q'v)` without forming an `n x n` matrix.
    pub fn apply(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        if self.basis.is_empty() {
            return v.to_owned();
        }
        let mut out = v.to_owned();
        out -= &self.basis.project(v);
        out
    }
}

/// `Φv` with `Φ = I - QQ'`.
pub fn perp_project(phi: &ProjectorHandle, v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if v.len() != phi.n() {
        return Err(Error::dims(phi.n(), v.len()));
    }
    Ok(phi.apply(v))
}

/// Spectral norm of the rows of `q` indexed by `support` (0-based).
///
/// This is the denseness coefficient evaluated for one support set rather than
/// maximised over all sets of a given size.
pub fn denseness_proxy(q: &BasisMatrix, support: &[usize]) -> Result<f64> {
    if support.is_empty() || q.is_empty() {
        return Ok(0.0);
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= q.n()) {
        return Err(Error::OutOfRange(format!(
            "support index {bad} outside ambient dimension {}",
            q.n()
        )));
    }
    let rows = q.matrix().select(Axis(0), support);
    Ok(spectral_norm(rows.view()))
}

/// Exact restricted isometry constant of `I - PP'` of order `s`, by enumerating
/// every support of size at most `s`. Exponential; refuses `n > 12`.
pub fn ric_of_projected_identity(p: &BasisMatrix, s: usize) -> Result<f64> {
    let n = p.n();
    if n > 12 {
        return Err(Error::ExponentialGuard(n));
    }
    let mut phi = Array2::<f64>::eye(n);
    phi -= &p.matrix().dot(&p.matrix().t());

    let mut worst = 0.0f64;
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > s {
            continue;
        }
        let cols: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = phi.select(Axis(1), &cols);
        // Eigenvalues of Ψ_T'Ψ_T are the squared singular values of Ψ_T.
        for sv in singular_values(sub.view()) {
            let lambda = sv * sv;
            worst = worst.max((1.0 - lambda).abs());
        }
    }
    Ok(worst)
}

/// `||(I - P̂P̂')P||_2`: sine of the largest principal angle of `range(P)` not
/// captured by `range(P̂)`.
pub fn subspace_error(p: &BasisMatrix, p_hat: &BasisMatrix) -> Result<f64> {
    if p.n() != p_hat.n() {
        return Err(Error::dims(p.n(), p_hat.n()));
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    let mut resid = p.matrix().to_owned();
    if !p_hat.is_empty() {
        let coeff = p_hat.matrix().t().dot(&p.matrix());
        resid -= &p_hat.matrix().dot(&coeff);
    }
    Ok(spectral_norm(resid.view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn e(n: usize, i: usize) -> BasisMatrix {
        let mut m = Array2::zeros((n, 1));
        m[(i, 0)] = 1.0;
        BasisMatrix::new(m).unwrap()
    }

    #[test]
    fn projector_examples() {
        let v = array![3.0, 4.0];
        let id = ProjectorHandle::identity(2);
        assert_eq!(perp_project(&id, v.view()).unwrap(), v);

        let phi = ProjectorHandle::new(e(2, 0));
        assert_eq!(perp_project(&phi, v.view()).unwrap(), array![0.0, 4.0]);

        let inside = array![5.0, 0.0];
        let out = perp_project(&phi, inside.view()).unwrap();
        assert!(out.dot(&out).sqrt() <= 1e-10 * 5.0);

        assert!(perp_project(&phi, array![1.0, 2.0, 3.0].view()).is_err());
    }

    #[test]
    fn denseness_examples() {
        let q = e(3, 0);
        assert_eq!(denseness_proxy(&q, &[0]).unwrap(), 1.0);
        assert_eq!(denseness_proxy(&q, &[1]).unwrap(), 0.0);
        assert_eq!(denseness_proxy(&q, &[]).unwrap(), 0.0);

        let n = 16;
        let flat = BasisMatrix::new(Array2::from_elem((n, 1), 1.0 / (n as f64).sqrt())).unwrap();
        let got = denseness_proxy(&flat, &[1, 4, 7, 9]).unwrap();
        assert!((got - (4.0 / 16.0f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn ric_examples() {
        assert_eq!(ric_of_projected_identity(&BasisMatrix::empty(4), 2).unwrap(), 0.0);
        let got = ric_of_projected_identity(&e(3, 0), 1).unwrap();
        assert!((got - 1.0).abs() < 1e-15);
        assert!(matches!(
            ric_of_projected_identity(&BasisMatrix::empty(13), 1),
            Err(Error::ExponentialGuard(13))
        ));
    }

    #[test]
    fn subspace_error_examples() {
        let p = e(3, 0);
        assert!(subspace_error(&p, &p).unwrap() < 1e-15);
        assert!((subspace_error(&p, &e(3, 1)).unwrap() - 1.0).abs() < 1e-15);
        let theta: f64 = 0.3;
        let rot = BasisMatrix::new(array![[theta.cos()], [theta.sin()], [0.0]]).unwrap();
        assert!((subspace_error(&p, &rot).unwrap() - theta.sin()).abs() < 1e-14);
    }
}
