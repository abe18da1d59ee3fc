//! Dense linear algebra kernels for subspace tracking.

mod basis;
mod subspace;
pub mod svd;

pub use basis::{approx_basis_energy, approx_basis_rank, inc_svd, INC_SVD_DRIFT_LIMIT};
pub use subspace::{
    denseness_proxy, perp_project, ric_of_projected_identity, subspace_error, ProjectorHandle,
};

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, ShapeBuilder};

use crate::error::{Error, Result};

/// Tolerance on `max |Q'Q - I|` accepted by [`BasisMatrix::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// An `n x r` matrix with orthonormal columns. `r = 0` is the empty basis.
/// Bases are always stored column-major so products with them follow the same
/// summation order wherever the basis came from.
fn column_major(data: Array2<f64>) -> Array2<f64> {
    if data.t().is_standard_layout() {
        return data;
    }
    let mut out = Array2::zeros(data.raw_dim().f());
    out.assign(&data);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    data: Array2<f64>,
}

impl BasisMatrix {
    /// Wrap `data` after checking that its columns are orthonormal.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.ncols() > data.nrows() {
            return Err(Error::OutOfRange(format!(
                "basis has {} columns but ambient dimension {}",
                data.ncols(),
                data.nrows()
            )));
        }
        let drift = svd::orthonormality_drift(data.view());
        if drift > ORTHONORMAL_TOL {
            return Err(Error::OutOfRange(format!(
                "columns are not orthonormal (drift {drift:e})"
            )));
        }
        Ok(BasisMatrix {
            data: column_major(data),
        })
    }

    pub(crate) fn from_trusted(data: Array2<f64>) -> Self {
        debug_assert!(data.ncols() <= data.nrows());
        BasisMatrix {
            data: column_major(data),
        }
    }

    pub fn empty(n: usize) -> Self {
        BasisMatrix {
            data: Array2::zeros((n, 0).f()),
        }
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of columns.
    pub fn rank(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rank() == 0
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.data
    }

    /// First `r` columns (clamped to the current rank).
    pub fn leading(&self, r: usize) -> BasisMatrix {
        let r = r.min(self.rank());
        BasisMatrix {
            data: column_major(self.data.slice(s![.., ..r]).to_owned()),
        }
    }

    /// `[self other]`. The caller guarantees that `other` is orthogonal to `self`.
    pub fn concat(&self, other: &BasisMatrix) -> Result<BasisMatrix> {
        if self.n() != other.n() {
            return Err(Error::dims(self.n(), other.n()));
        }
        let data = concatenate(Axis(1), &[self.data.view(), other.data.view()])
            .expect("row counts checked");
        Ok(BasisMatrix {
            data: column_major(data),
        })
    }

    /// Coefficients `Q'v`.
    pub fn coefficients(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        self.data.t().dot(&v)
    }

    /// Orthogonal projection `QQ'v` onto the span.
    pub fn project(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        self.data.dot(&self.coefficients(v))
    }

    /// `max |Q'Q - I|`.
    pub fn drift(&self) -> f64 {
        svd::orthonormality_drift(self.data.view())
    }
}

/// Nonincreasing, nonnegative singular values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::OutOfRange("singular values must be >= 0".into()));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::OutOfRange(
                "singular values must be nonincreasing".into(),
            ));
        }
        Ok(SingularSpectrum { values })
    }

    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        SingularSpectrum { values }
    }

    pub fn empty() -> Self {
        SingularSpectrum { values: Vec::new() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest retained value, if any.
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn leading(&self, r: usize) -> SingularSpectrum {
        SingularSpectrum {
            values: self.values[..r.min(self.values.len())].to_vec(),
        }
    }
}
