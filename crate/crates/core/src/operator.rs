//! Linear operators consumed by the sparse solver.
//!
//! The solver only needs `x ↦ Ax`, `y ↦ A'y` and a way to solve
//! `(A'A + I) x = b`. Perpendicular projectors provide the last one in closed
//! form; everything else falls back to a dense Cholesky factor (or conjugate
//! gradients when the operator is too wide to materialize).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::ProjectorHandle;

const DENSE_GRAM_LIMIT: usize = 2048;

pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64>;
    fn apply_adjoint(&self, y: ArrayView1<'_, f64>) -> Array1<f64>;

    /// Column `j` of the operator.
    fn column(&self, j: usize) -> Array1<f64> {
        let mut e = Array1::zeros(self.cols());
        e[j] = 1.0;
        self.apply(e.view())
    }

    /// Columns listed in `idx` as a dense `rows x |idx|` matrix.
    fn columns(&self, idx: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows(), idx.len()));
        for (k, &j) in idx.iter().enumerate() {
            out.column_mut(k).assign(&self.column(j));
        }
        out
    }

    /// A solver for `(A'A + I) x = b`.
    fn shifted_gram_solver(&self) -> Box<dyn ShiftedGramSolver + '_> {
        if self.cols() <= DENSE_GRAM_LIMIT {
            let cols: Vec<usize> = (0..self.cols()).collect();
            let a = self.columns(&cols);
            let mut g = a.t().dot(&a);
            for i in 0..g.nrows() {
                g[(i, i)] += 1.0;
            }
            Box::new(CholeskySolver::new(g))
        } else {
            Box::new(ConjugateGradient { op: self })
        }
    }
}

pub trait ShiftedGramSolver {
    fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64>;
}

struct CholeskySolver {
    lower: Array2<f64>,
}

impl CholeskySolver {
    fn new(g: Array2<f64>) -> Self {
        let n = g.nrows();
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = g[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            let d = d.max(f64::MIN_POSITIVE).sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut v = g[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        CholeskySolver { lower: l }
    }
}

impl ShiftedGramSolver for CholeskySolver {
    fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let l = &self.lower;
        let n = l.nrows();
        let mut z = b.to_owned();
        for i in 0..n {
            let mut v = z[i];
            for k in 0..i {
                v -= l[(i, k)] * z[k];
            }
            z[i] = v / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = z[i];
            for k in (i + 1)..n {
                v -= l[(k, i)] * z[k];
            }
            z[i] = v / l[(i, i)];
        }
        z
    }
}

struct ConjugateGradient<'a, T: ?Sized> {
    op: &'a T,
}

impl<T: LinearOperator + ?Sized> ShiftedGramSolver for ConjugateGradient<'_, T> {
    fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let apply = |x: &Array1<f64>| -> Array1<f64> {
            let mut out = self.op.apply_adjoint(self.op.apply(x.view()).view());
            out += x;
            out
        };
        let mut x = Array1::<f64>::zeros(b.len());
        let mut r = b.to_owned();
        let mut p = r.clone();
        let mut rs = r.dot(&r);
        let stop = 1e-28 * b.dot(&b).max(f64::MIN_POSITIVE);
        for _ in 0..(4 * b.len()).max(50) {
            if rs <= stop {
                break;
            }
            let ap = apply(&p);
            let step = rs / p.dot(&ap);
            x.scaled_add(step, &p);
            r.scaled_add(-step, &ap);
            let rs_new = r.dot(&r);
            p = &r + &(&p * (rs_new / rs));
            rs = rs_new;
        }
        x
    }
}

/// The `n x n` identity.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        x.to_owned()
    }
    fn apply_adjoint(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        y.to_owned()
    }
    fn shifted_gram_solver(&self) -> Box<dyn ShiftedGramSolver + '_> {
        Box::new(Scaled(0.5))
    }
}

struct Scaled(f64);

impl ShiftedGramSolver for Scaled {
    fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        b.mapv(|x| x * self.0)
    }
}

impl LinearOperator for ProjectorHandle {
    fn rows(&self) -> usize {
        self.n()
    }
    fn cols(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        ProjectorHandle::apply(self, x)
    }
    fn apply_adjoint(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        ProjectorHandle::apply(self, y)
    }
    /// `Φ` is an orthogonal projector, so `(Φ'Φ + I)^{-1} = I - Φ/2`.
    fn shifted_gram_solver(&self) -> Box<dyn ShiftedGramSolver + '_> {
        Box::new(ProjectorGram { phi: self })
    }
}

struct ProjectorGram<'a> {
    phi: &'a ProjectorHandle,
}

impl ShiftedGramSolver for ProjectorGram<'_> {
    fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let pb = self.phi.apply(b);
        let mut out = b.to_owned();
        out.scaled_add(-0.5, &pb);
        out
    }
}

/// A dense `m x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: Array2<f64>,
}

impl DenseOperator {
    pub fn new(matrix: Array2<f64>) -> Self {
        DenseOperator { matrix }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }
    fn cols(&self) -> usize {
        self.matrix.ncols()
    }
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.matrix.dot(&x)
    }
    fn apply_adjoint(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        self.matrix.t().dot(&y)
    }
    fn column(&self, j: usize) -> Array1<f64> {
        self.matrix.column(j).to_owned()
    }
}

/// `x ↦ Φ(Ax)`: a measurement matrix followed by a perpendicular projection.
pub struct ProjectedOperator<'a> {
    phi: &'a ProjectorHandle,
    inner: &'a DenseOperator,
}

impl<'a> ProjectedOperator<'a> {
    pub fn new(phi: &'a ProjectorHandle, inner: &'a DenseOperator) -> Result<Self> {
        if phi.n() != inner.rows() {
            return Err(Error::dims(phi.n(), inner.rows()));
        }
        Ok(ProjectedOperator { phi, inner })
    }
}

impl LinearOperator for ProjectedOperator<'_> {
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.phi.apply(self.inner.apply(x).view())
    }
    fn apply_adjoint(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        self.inner.apply_adjoint(self.phi.apply(y).view())
    }
    fn column(&self, j: usize) -> Array1<f64> {
        self.phi.apply(self.inner.matrix.column(j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::BasisMatrix;
    use ndarray::array;

    fn check_solver(op: &dyn LinearOperator, b: &Array1<f64>) {
        let x = op.shifted_gram_solver().solve(b.view());
        let mut back = op.apply_adjoint(op.apply(x.view()).view());
        back += &x;
        assert!((&back - b).iter().all(|e| e.abs() < 1e-10), "{back} vs {b}");
    }

    #[test]
    fn gram_solvers_agree() {
        let q = BasisMatrix::new(array![[0.6], [0.8], [0.0]]).unwrap();
        let phi = ProjectorHandle::new(q);
        let b = array![1.0, -2.0, 0.5];
        check_solver(&phi, &b);
        check_solver(&IdentityOperator(3), &b);

        let a = DenseOperator::new(array![[1.0, 2.0, 0.0], [0.0, 1.0, -1.0], [3.0, 0.0, 1.0]]);
        check_solver(&a, &b);
        let comp = ProjectedOperator::new(&phi, &a).unwrap();
        check_solver(&comp, &b);

        let cg = ConjugateGradient { op: &a };
        let x = cg.solve(b.view());
        let mut back = a.apply_adjoint(a.apply(x.view()).view());
        back += &x;
        assert!((&back - &b).iter().all(|e| e.abs() < 1e-10));
    }

    #[test]
    fn adjoint_consistency() {
        let a = DenseOperator::new(array![[1.0, 2.0], [0.0, 1.0], [3.0, 0.5]]);
        let q = BasisMatrix::new(array![[1.0], [0.0], [0.0]]).unwrap();
        let phi = ProjectorHandle::new(q);
        let op = ProjectedOperator::new(&phi, &a).unwrap();
        let x = array![0.3, -1.1];
        let y = array![2.0, 0.1, -0.7];
        let lhs = op.apply(x.view()).dot(&y);
        let rhs = x.dot(&op.apply_adjoint(y.view()));
        assert!((lhs - rhs).abs() < 1e-14);
        assert_eq!(op.column(1), op.apply(array![0.0, 1.0].view()));
    }
}
