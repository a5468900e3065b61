use nalgebra::Vector3;

use super::{check_len, RibbonModel, StructureError};
use crate::linalg::{SparseMatrix, TripletBuilder};

/// Stacked unknowns `y = [q, s, λ]` of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedState {
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub lam: Vec<f64>,
}

impl GeneralizedState {
    pub fn zeros(model: &RibbonModel) -> Self {
        Self {
            q: vec![0.0; model.dof()],
            s: vec![0.0; model.dof()],
            lam: vec![0.0; model.constraint_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.q.len() + self.s.len() + self.lam.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len());
        y.extend_from_slice(&self.q);
        y.extend_from_slice(&self.s);
        y.extend_from_slice(&self.lam);
        y
    }

    pub fn from_slice(model: &RibbonModel, y: &[f64]) -> Result<Self, StructureError> {
        let (n, c) = (model.dof(), model.constraint_count());
        check_len(2 * n + c, y.len())?;
        Ok(Self {
            q: y[..n].to_vec(),
            s: y[n..2 * n].to_vec(),
            lam: y[2 * n..].to_vec(),
        })
    }

    /// Kinetic energy `½ sᵀ M s`.
    pub fn kinetic_energy(&self, model: &RibbonModel) -> f64 {
        0.5 * self.s.iter().zip(model.mass_diagonal()).map(|(s, m)| m * s * s).sum::<f64>()
    }
}

/// Data fixed during one step: the previous state, the step size and loads.
#[derive(Debug, Clone)]
pub struct ResidualContext<'a> {
    pub q_n: &'a [f64],
    pub s_n: &'a [f64],
    pub dt: f64,
    /// Generalized aerodynamic forces, already evaluated for the current iterate.
    pub f_ae: &'a [f64],
    pub gravity: Vector3<f64>,
}

/// Structural part of the step residual at `y = [q, s, λ]`.
pub fn assemble_residual(model: &RibbonModel, ctx: &ResidualContext, y: &[f64]) -> Result<Vec<f64>, StructureError> {
    let (n, c) = (model.dof(), model.constraint_count());
    check_len(2 * n + c, y.len())?;
    check_len(n, ctx.q_n.len())?;
    check_len(n, ctx.s_n.len())?;
    check_len(n, ctx.f_ae.len())?;
    if !(ctx.dt > 0.0) {
        return Err(StructureError::InvalidParams(format!("time step must be positive, got {}", ctx.dt)));
    }
    let (q, rest) = y.split_at(n);
    let (s, lam) = rest.split_at(n);
    let q_m: Vec<f64> = q.iter().zip(ctx.q_n).map(|(a, b)| 0.5 * (a + b)).collect();
    let f_int = model.internal_forces(&q_m)?;
    let mass = model.mass_diagonal();
    let h = model.constraint_jacobian();
    let ht_lam = h.transpose().matvec(lam).expect("dimension checked");

    let mut r = vec![0.0; 2 * n + c];
    for i in 0..n {
        let grav = mass[i] * ctx.gravity[i % 3];
        r[i] = mass[i] * (s[i] - ctx.s_n[i]) / ctx.dt + f_int[i] - ctx.f_ae[i] - grav + ht_lam[i];
        r[n + i] = mass[i] * 0.5 * (s[i] + ctx.s_n[i]) - mass[i] * (q[i] - ctx.q_n[i]) / ctx.dt;
    }
    r[2 * n..].copy_from_slice(&model.constraints(q)?);
    Ok(r)
}

/// `∂R/∂y` with aerodynamic loads held fixed.
pub fn assemble_structural_jacobian(
    model: &RibbonModel,
    ctx: &ResidualContext,
    y: &[f64],
) -> Result<SparseMatrix, StructureError> {
    let (n, c) = (model.dof(), model.constraint_count());
    check_len(2 * n + c, y.len())?;
    check_len(n, ctx.q_n.len())?;
    let q_m: Vec<f64> = y[..n].iter().zip(ctx.q_n).map(|(a, b)| 0.5 * (a + b)).collect();
    let dim = 2 * n + c;
    let h = model.constraint_jacobian();
    let mut b = TripletBuilder::with_capacity(dim, dim, 40 * n + 2 * h.nnz());
    model.add_stiffness(&q_m, 0.5, 0, &mut b);
    for (i, m) in model.mass_diagonal().into_iter().enumerate() {
        b.add(i, n + i, m / ctx.dt);
        b.add(n + i, i, -m / ctx.dt);
        b.add(n + i, n + i, 0.5 * m);
    }
    for r in 0..c {
        for (col, v) in h.row(r) {
            b.add(2 * n + r, col, v);
            b.add(col, 2 * n + r, v);
        }
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::factorize_sparse;
    use crate::structure::{RibbonParams, SpringLaw, Supports};

    fn small(law: SpringLaw, supports: Supports) -> RibbonModel {
        RibbonModel::new(RibbonParams {
            law,
            supports,
            ..RibbonParams::aluminium_plate(4)
        })
        .unwrap()
    }

    fn wiggle(n: usize, scale: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|i| scale * ((i as f64) * 0.7 + phase).sin()).collect()
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = small(SpringLaw::Geometric, Supports::Hinged);
        let n = m.dof();
        let q_n = wiggle(n, 0.02, 0.1);
        let s_n = wiggle(n, 0.5, 1.3);
        let f_ae = wiggle(n, 100.0, 2.0);
        let ctx = ResidualContext {
            q_n: &q_n,
            s_n: &s_n,
            dt: 0.01,
            f_ae: &f_ae,
            gravity: Vector3::new(0.0, 0.0, -9.81),
        };
        let y = wiggle(2 * n + m.constraint_count(), 0.03, 0.4);
        let jac = assemble_structural_jacobian(&m, &ctx, &y).unwrap().to_dense();
        let r0 = assemble_residual(&m, &ctx, &y).unwrap();
        let scale = jac.max_abs();
        for j in 0..y.len() {
            let h = 1e-6;
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            let rp = assemble_residual(&m, &ctx, &yp).unwrap();
            let rm = assemble_residual(&m, &ctx, &ym).unwrap();
            for i in 0..r0.len() {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                assert!((fd - jac[(i, j)]).abs() < 1e-6 * scale, "({i},{j}) fd {fd} vs {}", jac[(i, j)]);
            }
        }
    }

    #[test]
    fn pattern_is_state_independent() {
        let m = small(SpringLaw::Geometric, Supports::Hinged);
        let n = m.dof();
        let zero = vec![0.0; n];
        let ctx = ResidualContext {
            q_n: &zero,
            s_n: &zero,
            dt: 0.01,
            f_ae: &zero,
            gravity: Vector3::zeros(),
        };
        let y0 = vec![0.0; 2 * n + m.constraint_count()];
        let y1 = wiggle(y0.len(), 0.1, 0.0);
        let a = assemble_structural_jacobian(&m, &ctx, &y0).unwrap();
        let b = assemble_structural_jacobian(&m, &ctx, &y1).unwrap();
        assert_eq!(a.pattern(), b.pattern());
    }

    #[test]
    fn translation_leaves_internal_forces_unchanged() {
        // dyadic values keep every difference exact
        let m = small(SpringLaw::Geometric, Supports::Free);
        let q: Vec<f64> = (0..m.dof()).map(|i| ((i * 7) % 13) as f64 / 64.0).collect();
        let shift = [0.5, -0.25, 0.125];
        let shifted: Vec<f64> = q.iter().enumerate().map(|(i, v)| v + shift[i % 3]).collect();
        assert_eq!(m.internal_forces(&q).unwrap(), m.internal_forces(&shifted).unwrap());
    }

    #[test]
    fn free_linear_ribbon_conserves_energy() {
        let m = small(SpringLaw::Linear, Supports::Free);
        let n = m.dof();
        let zero = vec![0.0; n];
        let mut q = wiggle(n, 1e-3, 0.3);
        let mut s = wiggle(n, 0.1, 2.1);
        let energy = |q: &[f64], s: &[f64]| {
            let st = GeneralizedState {
                q: q.to_vec(),
                s: s.to_vec(),
                lam: vec![],
            };
            st.kinetic_energy(&m) + m.potential_energy(q).unwrap()
        };
        let e0 = energy(&q, &s);
        for _ in 0..50 {
            let ctx = ResidualContext {
                q_n: &q,
                s_n: &s,
                dt: 1e-3,
                f_ae: &zero,
                gravity: Vector3::zeros(),
            };
            let mut y: Vec<f64> = q.iter().chain(&s).copied().collect();
            let r = assemble_residual(&m, &ctx, &y).unwrap();
            let jac = assemble_structural_jacobian(&m, &ctx, &y).unwrap();
            let dy = factorize_sparse(&jac).unwrap().solve(&r).unwrap();
            for (a, d) in y.iter_mut().zip(dy) {
                *a -= d;
            }
            q = y[..n].to_vec();
            s = y[n..].to_vec();
        }
        let e1 = energy(&q, &s);
        assert!(((e1 - e0) / e0).abs() < 1e-10, "{e0} -> {e1}");
    }

    #[test]
    fn rejects_bad_lengths() {
        let m = small(SpringLaw::Geometric, Supports::Hinged);
        let zero = vec![0.0; m.dof()];
        let ctx = ResidualContext {
            q_n: &zero,
            s_n: &zero,
            dt: 0.01,
            f_ae: &zero,
            gravity: Vector3::zeros(),
        };
        assert!(assemble_residual(&m, &ctx, &[0.0; 5]).is_err());
        let st = GeneralizedState::zeros(&m);
        assert_eq!(GeneralizedState::from_slice(&m, &st.to_vec()).unwrap(), st);
    }
}
