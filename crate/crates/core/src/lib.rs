//! Online separation of a vector sequence `M_t = S_t + L_t` into a sparse part and
//! a part lying in a slowly changing low-dimensional subspace.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: SVD-based basis extraction, incremental SVD, matrix-free
//!   perpendicular projection and subspace diagnostics.
//! - [`operator`]: linear operators used by the sparse solver (projectors,
//!   dense matrices, compositions).
//! - [`sparse`]: weighted ℓ1 minimisation under a residual budget and the
//!   add / least-squares / delete support estimation primitives.
//! - [`engine`]: the per-frame online state machine (projection PCA, recursive
//!   PCA and compressive measurements).
//! - [`datagen`]: synthetic sequences with known ground truth.
//! - [`eval`]: error metrics, model verification series and the Monte-Carlo
//!   benchmark harness.
//! - [`io`]: the binary sequence container, PGM ingestion, run configs and
//!   checkpoints.
//! - [`cli`]: the `reprocs` command-line front end.

pub mod cli;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod eval;
pub mod frames;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod sparse;

pub use error::{Error, Result};
pub use frames::FrameSequence;
