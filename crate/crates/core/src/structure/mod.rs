//! Rotation-free ribbon model of a thin plate strip.
//!
//! Two span-wise chains of point masses (leading and trailing edge) are tied
//! together by stretch, chord, shear-diagonal and bending springs. The
//! generalized coordinates `q` are nodal displacements from the reference
//! configuration, three per node; positions are `X + q`.
//!
//! One implicit-midpoint step is written as the saddle-point residual
//!
//! ```text
//! M (s1 - s0)/dt + f_int(q_m) - f_ae - f_grav + Hᵀ λ
//! M s_m - M (q1 - q0)/dt
//! h(q1)
//! ```

mod model;
mod residual;

pub use model::{BendSpring, RibbonModel, RibbonParams, SpringLaw, StretchSpring, Supports};
pub use residual::{assemble_residual, assemble_structural_jacobian, GeneralizedState, ResidualContext};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid ribbon parameters: {0}")]
    InvalidParams(String),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), StructureError> {
    if expected != found {
        Err(StructureError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}
