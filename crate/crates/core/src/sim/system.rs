use std::time::Instant;

use crate::coupling::{aero_force_function, aero_jacobian, AeroForceContext, TransferMap};
use crate::linalg::{DenseBlock, SparseMatrix};
use crate::solvers::{EvalTimes, SolverError, SplitSystem};
use crate::structure::{assemble_residual, assemble_structural_jacobian, ResidualContext, RibbonModel};
use crate::uvlm::Vec3;

/// The equilibrium rows are multiplied by `dt` so that they, like the
/// momentum rows, measure momentum. Newton steps are unchanged by this row
/// scaling; only the norms used in the stopping tests see it.
fn scale_equilibrium(r: &mut [f64], n: usize, dt: f64) {
    r[..n].iter_mut().for_each(|v| *v *= dt);
}

fn row_factors(n: usize, dim: usize, dt: f64) -> Vec<f64> {
    (0..dim).map(|i| if i < n { dt } else { 1.0 }).collect()
}

fn eval_err<E: std::error::Error + Send + Sync + 'static>(e: E) -> SolverError {
    SolverError::Evaluation(Box::new(e))
}

/// One strongly coupled time step: ribbon residual with aerodynamic loads
/// evaluated at the unknown state.
pub struct CoupledStepSystem<'a> {
    pub model: &'a RibbonModel,
    pub map: &'a TransferMap,
    pub aero: &'a AeroForceContext,
    pub q_n: &'a [f64],
    pub s_n: &'a [f64],
    pub gravity: Vec3,
    pub fd_eps: f64,
}

impl CoupledStepSystem<'_> {
    fn split<'y>(&self, y: &'y [f64]) -> (&'y [f64], &'y [f64]) {
        let n = self.model.dof();
        (&y[..n], &y[n..2 * n])
    }

    fn context<'b>(&'b self, f_ae: &'b [f64]) -> ResidualContext<'b> {
        ResidualContext {
            q_n: self.q_n,
            s_n: self.s_n,
            dt: self.aero.dt,
            f_ae,
            gravity: self.gravity,
        }
    }
}

impl SplitSystem for CoupledStepSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.model.dof() + self.model.constraint_count()
    }

    fn residual(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<Vec<f64>, SolverError> {
        let (q, s) = self.split(y);
        let t = Instant::now();
        let aero = aero_force_function(self.aero, self.map, q, s).map_err(eval_err)?;
        times.uvlm += t.elapsed();
        let t = Instant::now();
        let r = assemble_residual(self.model, &self.context(&aero.f_ae), y).map_err(eval_err);
        times.structure += t.elapsed();
        let mut r = r?;
        scale_equilibrium(&mut r, self.model.dof(), self.aero.dt);
        Ok(r)
    }

    fn structural_jacobian(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<SparseMatrix, SolverError> {
        let zero = vec![0.0; self.model.dof()];
        let t = Instant::now();
        let k = assemble_structural_jacobian(self.model, &self.context(&zero), y).map_err(eval_err);
        times.structure += t.elapsed();
        let mut k = k?;
        k.scale_rows(&row_factors(self.model.dof(), self.dim(), self.aero.dt))?;
        Ok(k)
    }

    fn aero_blocks(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<Vec<DenseBlock>, SolverError> {
        let (q, s) = self.split(y);
        let t = Instant::now();
        let (mut k_qq, mut k_qs) = aero_jacobian(self.aero, self.map, q, s, self.fd_eps).map_err(eval_err)?;
        times.uvlm += t.elapsed();
        k_qq.scale(self.aero.dt);
        k_qs.scale(self.aero.dt);
        let n = self.model.dof();
        Ok(vec![DenseBlock::new(0, 0, k_qq), DenseBlock::new(0, n, k_qs)])
    }
}

/// One step of the ribbon alone under prescribed external forces.
pub struct StructuralStepSystem<'a> {
    pub model: &'a RibbonModel,
    pub q_n: &'a [f64],
    pub s_n: &'a [f64],
    pub dt: f64,
    pub f_ext: &'a [f64],
    pub gravity: Vec3,
}

impl StructuralStepSystem<'_> {
    fn context(&self) -> ResidualContext<'_> {
        ResidualContext {
            q_n: self.q_n,
            s_n: self.s_n,
            dt: self.dt,
            f_ae: self.f_ext,
            gravity: self.gravity,
        }
    }
}

impl SplitSystem for StructuralStepSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.model.dof() + self.model.constraint_count()
    }

    fn residual(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<Vec<f64>, SolverError> {
        let t = Instant::now();
        let r = assemble_residual(self.model, &self.context(), y).map_err(eval_err);
        times.structure += t.elapsed();
        let mut r = r?;
        scale_equilibrium(&mut r, self.model.dof(), self.dt);
        Ok(r)
    }

    fn structural_jacobian(&mut self, y: &[f64], times: &mut EvalTimes) -> Result<SparseMatrix, SolverError> {
        let t = Instant::now();
        let k = assemble_structural_jacobian(self.model, &self.context(), y).map_err(eval_err);
        times.structure += t.elapsed();
        let mut k = k?;
        k.scale_rows(&row_factors(self.model.dof(), self.dim(), self.dt))?;
        Ok(k)
    }

    fn aero_blocks(&mut self, _: &[f64], _: &mut EvalTimes) -> Result<Vec<DenseBlock>, SolverError> {
        Ok(Vec::new())
    }
}
