//! Dense and sparse linear algebra used by the rest of the crate.
//!
//! Everything here is deterministic: assembly, products and factorizations
//! accumulate in a fixed order so repeated runs are bit-identical.

mod dense;
mod lu;
mod sparse;

pub use dense::{DenseBlock, DenseMatrix};
pub use lu::{factorize_dense, factorize_sparse, BandedLu, DenseLu, Factorization, FactorizationInfo};
pub use sparse::{SparseMatrix, TripletBuilder};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular matrix: pivot {pivot:.3e} in column {column} below threshold {threshold:.3e}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Relative pivot threshold below which a factorization is declared singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected != found {
        Err(LinalgError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}
