use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// An `n x T` stack of frames, one column per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    data: Array2<f64>,
}

impl FrameSequence {
    pub fn new(data: Array2<f64>) -> Self {
        FrameSequence { data }
    }

    pub fn zeros(n: usize, frames: usize) -> Self {
        FrameSequence {
            data: Array2::zeros((n, frames)),
        }
    }

    pub fn from_columns(n: usize, columns: &[Array1<f64>]) -> Result<Self> {
        let mut data = Array2::zeros((n, columns.len()));
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::dims(n, c.len()));
            }
            data.column_mut(j).assign(c);
        }
        Ok(FrameSequence { data })
    }

    /// Vector length.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.data.column(t)
    }

    pub fn frames(&self) -> impl Iterator<Item = ArrayView1<'_, f64>> {
        self.data.columns().into_iter()
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.data
    }

    /// Frames `start..end`.
    pub fn range(&self, start: usize, end: usize) -> FrameSequence {
        FrameSequence {
            data: self.data.slice(s![.., start..end]).to_owned(),
        }
    }

    pub fn push(&mut self, frame: ArrayView1<'_, f64>) -> Result<()> {
        if frame.len() != self.n() {
            return Err(Error::dims(self.n(), frame.len()));
        }
        self.data
            .push_column(frame)
            .expect("length checked against row count");
        Ok(())
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Column mean.
    pub fn mean(&self) -> Array1<f64> {
        self.data
            .mean_axis(Axis(1))
            .unwrap_or_else(|| Array1::zeros(self.n()))
    }
}
