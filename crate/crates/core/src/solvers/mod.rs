//! Newton-type solvers for systems whose Jacobian splits into a sparse
//! structural part and dense aerodynamic blocks.
//!
//! * exact Newton factorizes the full Jacobian,
//! * quasi-Newton only ever uses the structural part `B = K_str`,
//! * inexact Newton solves `F′Δy = −F` by iterative refinement with `B⁻¹`
//!   up to a forcing tolerance `η_k ‖F‖`.

mod newton;

pub use newton::{estimate_contraction, line_search_armijo, newton_exact, newton_inexact, newton_quasi, solve};

use std::error::Error as StdError;
use std::time::Duration;

use thiserror::Error;

use crate::linalg::{DenseBlock, DenseMatrix, LinalgError, SparseMatrix};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("no convergence after {} Newton steps (|F| = {:.3e})", report.newton_steps, report.final_residual())]
    MaxStepsExceeded { best: Vec<f64>, report: Box<NewtonReport> },
    #[error("quasi-Newton diverging: |F| grew for {increases} consecutive steps")]
    Divergence { increases: usize, report: Box<NewtonReport> },
    #[error("iterative refinement stalled at refinement {refinement}: |r| {current:.3e} >= {previous:.3e}")]
    RefinementStall { refinement: usize, current: f64, previous: f64 },
    #[error("Armijo line search failed after {halvings} halvings")]
    LineSearchFailed { halvings: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("system evaluation failed: {0}")]
    Evaluation(#[source] Box<dyn StdError + Send + Sync>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Exact,
    Quasi,
    Inexact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damping {
    FullStep,
    Armijo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingKind {
    /// `min(cap, ‖F‖)`
    Variant1,
    /// `scale · min(cap, ‖F‖)`, scale 1e-5 by default
    Variant2,
    /// fixed `scale`
    Constant,
    /// `scale · min(cap, ‖F‖)` with a user scale
    CustomScale,
}

pub const ETA_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingSequence {
    pub kind: ForcingKind,
    pub scale: f64,
    pub cap: f64,
}

impl ForcingSequence {
    pub fn variant1() -> Self {
        Self {
            kind: ForcingKind::Variant1,
            scale: 1.0,
            cap: 0.5,
        }
    }

    pub fn variant2() -> Self {
        Self {
            kind: ForcingKind::Variant2,
            scale: 1e-5,
            cap: 0.5,
        }
    }

    pub fn constant(eta: f64) -> Self {
        Self {
            kind: ForcingKind::Constant,
            scale: eta,
            cap: 0.5,
        }
    }

    pub fn custom_scale(scale: f64) -> Self {
        Self {
            kind: ForcingKind::CustomScale,
            scale,
            cap: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = match self.kind {
            ForcingKind::Constant => self.scale > 0.0 && self.scale < 1.0,
            _ => self.scale > 0.0 && self.scale <= 1.0 && self.cap > 0.0 && self.cap < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(format!("forcing sequence {self:?} does not stay in (0, 1)")))
        }
    }

    /// `η_k` for Newton step `k` with current residual norm `norm_f`.
    pub fn eta(&self, _k: usize, norm_f: f64) -> f64 {
        let base = self.cap.min(norm_f);
        let eta = match self.kind {
            ForcingKind::Variant1 => base,
            ForcingKind::Variant2 | ForcingKind::CustomScale => self.scale * base,
            ForcingKind::Constant => self.scale,
        };
        eta.max(ETA_FLOOR)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Absolute tolerance on `‖F‖₂`.
    pub tol: f64,
    pub max_steps: usize,
    pub variant: Variant,
    pub damping: Damping,
    pub armijo_c: f64,
    pub max_refinements: usize,
    pub forcing: ForcingSequence,
    /// Keep every iterate in the report.
    pub record_iterates: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_steps: 50,
            variant: Variant::Exact,
            damping: Damping::FullStep,
            armijo_c: 1e-4,
            max_refinements: 50,
            forcing: ForcingSequence::variant1(),
            record_iterates: false,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_steps == 0 {
            return Err(SolverError::InvalidConfig("max_steps must be >= 1".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(SolverError::InvalidConfig(format!("armijo_c must lie in (0, 1), got {}", self.armijo_c)));
        }
        if self.max_refinements == 0 {
            return Err(SolverError::InvalidConfig("max_refinements must be >= 1".into()));
        }
        self.forcing.validate()
    }
}

/// Time spent inside system callbacks, split by physics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalTimes {
    pub uvlm: Duration,
    pub structure: Duration,
}

/// Linear-residual history of one inexact Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRecord {
    pub eta: f64,
    pub residual_norm: f64,
    /// `‖r^j‖₂` for `j = 0, 1, …` with `r⁰ = F(y_k)`.
    pub linear_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub converged: bool,
    pub newton_steps: usize,
    pub refinement_steps: usize,
    /// `‖F(y_k)‖₂` for every evaluated iterate.
    pub residual_history: Vec<f64>,
    pub eval_uvlm: Duration,
    pub eval_structure: Duration,
    pub linear_solver: Duration,
    pub step_lengths: Vec<f64>,
    pub refinements: Vec<RefinementRecord>,
    pub iterates: Vec<Vec<f64>>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// `F′ = K_str + Σ dense blocks`; the blocks only occupy equilibrium rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitJacobian {
    pub structural: SparseMatrix,
    pub blocks: Vec<DenseBlock>,
}

impl SplitJacobian {
    pub fn new(structural: SparseMatrix, blocks: Vec<DenseBlock>) -> Result<Self, SolverError> {
        let n = structural.n_rows();
        if structural.n_cols() != n {
            return Err(LinalgError::NotSquare {
                rows: n,
                cols: structural.n_cols(),
            }
            .into());
        }
        if let Some(b) = blocks.iter().find(|b| !b.fits_within(n, n)) {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                found: (b.row_offset + b.data.n_rows()).max(b.col_offset + b.data.n_cols()),
            });
        }
        Ok(Self { structural, blocks })
    }

    pub fn dim(&self) -> usize {
        self.structural.n_rows()
    }

    pub fn has_aero(&self) -> bool {
        !self.blocks.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        let mut y = self.structural.matvec(x)?;
        for b in &self.blocks {
            b.add_product(x, &mut y);
        }
        Ok(y)
    }

    /// `|F′|·|x|`, the scale of rounding errors in `F′x`.
    pub fn abs_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.structural.row(i).map(|(j, v)| (v * x[j]).abs()).sum();
        }
        for b in &self.blocks {
            for r in 0..b.data.n_rows() {
                let row = b.data.row(r);
                let xs = &x[b.col_offset..b.col_offset + row.len()];
                y[b.row_offset + r] += row.iter().zip(xs).map(|(a, v)| (a * v).abs()).sum::<f64>();
            }
        }
        y
    }

    pub fn materialize(&self) -> DenseMatrix {
        let mut a = self.structural.to_dense();
        for b in &self.blocks {
            b.add_into(&mut a);
        }
        a
    }
}

/// A nonlinear system `F(y) = 0` with a split Jacobian.
pub trait SplitSystem {
    fn dim(&self) -> usize;

    fn residual(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<Vec<f64>, SolverError>;

    fn structural_jacobian(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<SparseMatrix, SolverError>;

    /// Dense additions to `K_str`; empty when the aerodynamic part is absent.
    fn aero_blocks(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<Vec<DenseBlock>, SolverError>;

    fn split_jacobian(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<SplitJacobian, SolverError> {
        let s = self.structural_jacobian(y, times)?;
        let b = self.aero_blocks(y, times)?;
        SplitJacobian::new(s, b)
    }
}
