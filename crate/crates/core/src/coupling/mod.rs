//! Transfer between the structural ribbon and the vortex lattice.
//!
//! Aerodynamic nodes follow the structure through fixed weights `W` computed
//! on the reference configurations with a compactly supported bump function.
//! Displacements and velocities go `W·u`, forces come back as `Wᵀ·F`, which
//! makes the transfer consistent in virtual work.

use thiserror::Error;

use crate::linalg::{DenseMatrix, LinalgError};
use crate::uvlm::{
    assemble_influence_matrix, circulation_rhs_with_wake, compute_loads, solve_circulations, total_force,
    wake_velocity_at_rings, FlowConditions, LatticeState, UvlmConfig, UvlmError, Vec3, WakeState,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("aero node {node} has no structural node within the transfer radius")]
    UncoveredAeroNode { node: usize },
    #[error("transfer radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite aerodynamic derivative in column {column}")]
    NonFiniteDerivative { column: usize },
    #[error(transparent)]
    Uvlm(#[from] UvlmError),
}

impl From<LinalgError> for CouplingError {
    fn from(e: LinalgError) -> Self {
        CouplingError::Uvlm(UvlmError::Linalg(e))
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), CouplingError> {
    if expected != found {
        return Err(CouplingError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `exp(1 − 1/(1 − (r/γ)²))` inside the support, zero outside.
pub fn bump_weight(r: f64, gamma_ref: f64) -> f64 {
    let x = r / gamma_ref;
    if x >= 1.0 {
        return 0.0;
    }
    (1.0 - 1.0 / (1.0 - x * x)).exp()
}

/// Row-normalized weights from aerodynamic nodes to structural nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMap {
    gamma_ref: f64,
    n_struct: usize,
    aero_reference: Vec<Vec3>,
    rows: Vec<Vec<(usize, f64)>>,
}

pub fn build_transfer_map(
    struct_ref_nodes: &[Vec3],
    aero_ref_nodes: &[Vec3],
    gamma_ref: f64,
) -> Result<TransferMap, CouplingError> {
    if !(gamma_ref > 0.0 && gamma_ref.is_finite()) {
        return Err(CouplingError::InvalidRadius(gamma_ref));
    }
    let mut rows = Vec::with_capacity(aero_ref_nodes.len());
    for (a, pa) in aero_ref_nodes.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = struct_ref_nodes
            .iter()
            .enumerate()
            .map(|(j, ps)| (j, bump_weight((pa - ps).norm(), gamma_ref)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let sum: f64 = row.iter().map(|(_, w)| w).sum();
        if row.is_empty() || !(sum > 0.0) {
            return Err(CouplingError::UncoveredAeroNode { node: a });
        }
        for (_, w) in row.iter_mut() {
            *w /= sum;
        }
        rows.push(row);
    }
    Ok(TransferMap {
        gamma_ref,
        n_struct: struct_ref_nodes.len(),
        aero_reference: aero_ref_nodes.to_vec(),
        rows,
    })
}

impl TransferMap {
    pub fn gamma_ref(&self) -> f64 {
        self.gamma_ref
    }

    pub fn aero_count(&self) -> usize {
        self.rows.len()
    }

    pub fn struct_count(&self) -> usize {
        self.n_struct
    }

    pub fn aero_reference(&self) -> &[Vec3] {
        &self.aero_reference
    }

    /// Nonzero weights `(structural node, w)` of aero node `a`.
    pub fn row(&self, a: usize) -> &[(usize, f64)] {
        &self.rows[a]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut w = DenseMatrix::zeros(self.rows.len(), self.n_struct);
        for (a, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                w.row_mut(a)[*j] = *v;
            }
        }
        w
    }

    /// `W · v` for a stacked per-node 3-vector field.
    pub fn interpolate(&self, nodal: &[f64]) -> Result<Vec<Vec3>, CouplingError> {
        check_len(3 * self.n_struct, nodal.len())?;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter().fold(Vec3::zeros(), |acc, (j, w)| {
                    acc + Vec3::new(nodal[3 * j], nodal[3 * j + 1], nodal[3 * j + 2]) * *w
                })
            })
            .collect())
    }

    /// `Wᵀ · F` for per-aero-node forces, stacked per structural node.
    pub fn transpose_apply(&self, aero_forces: &[Vec3]) -> Result<Vec<f64>, CouplingError> {
        check_len(self.rows.len(), aero_forces.len())?;
        let mut out = vec![0.0; 3 * self.n_struct];
        for (row, f) in self.rows.iter().zip(aero_forces) {
            for (j, w) in row {
                for d in 0..3 {
                    out[3 * j + d] += w * f[d];
                }
            }
        }
        Ok(out)
    }
}

/// Aero node positions and velocities for structural displacements `q` and velocities `s`.
pub fn surface_kinematics(map: &TransferMap, q: &[f64], s: &[f64]) -> Result<(Vec<Vec3>, Vec<Vec3>), CouplingError> {
    let disp = map.interpolate(q)?;
    let vel = map.interpolate(s)?;
    let pos = map.aero_reference.iter().zip(disp).map(|(x, u)| x + u).collect();
    Ok((pos, vel))
}

/// Velocity at each ring center as the mean of its corner velocities.
pub fn collocation_velocities(lattice: &LatticeState, node_velocities: &[Vec3]) -> Vec<Vec3> {
    (0..lattice.ring_count())
        .map(|r| {
            lattice
                .corner_indices(r)
                .iter()
                .fold(Vec3::zeros(), |acc, n| acc + node_velocities[*n])
                * 0.25
        })
        .collect()
}

/// Splits each ring force equally over its corners and maps back with `Wᵀ`.
pub fn generalized_aero_forces(
    map: &TransferMap,
    lattice: &LatticeState,
    panel_forces: &[Vec3],
) -> Result<Vec<f64>, CouplingError> {
    check_len(lattice.ring_count(), panel_forces.len())?;
    check_len(lattice.nodes().len(), map.aero_count())?;
    let mut nodal = vec![Vec3::zeros(); map.aero_count()];
    for (r, f) in panel_forces.iter().enumerate() {
        for n in lattice.corner_indices(r) {
            nodal[n] += f * 0.25;
        }
    }
    map.transpose_apply(&nodal)
}

/// Everything held fixed while one step's nonlinear system is solved.
#[derive(Debug, Clone)]
pub struct AeroForceContext {
    pub wake: WakeState,
    pub gamma_prev: Vec<f64>,
    pub flow: FlowConditions,
    pub dt: f64,
    pub uvlm: UvlmConfig,
}

#[derive(Debug, Clone)]
pub struct AeroEvaluation {
    pub f_ae: Vec<f64>,
    pub lattice: LatticeState,
    pub panel_forces: Vec<Vec3>,
    pub total_force: Vec3,
}

pub fn aero_force_function(
    ctx: &AeroForceContext,
    map: &TransferMap,
    q: &[f64],
    s: &[f64],
) -> Result<AeroEvaluation, CouplingError> {
    let cfg = &ctx.uvlm;
    let (pos, node_vel) = surface_kinematics(map, q, s)?;
    let mut lattice = LatticeState::from_nodes(cfg.span_panels, cfg.chord_panels, pos)?;
    check_len(lattice.ring_count(), ctx.gamma_prev.len())?;
    let v_s = collocation_velocities(&lattice, &node_vel);
    let v_w = wake_velocity_at_rings(&lattice, &ctx.wake, cfg.cutoff_delta);
    let rhs = circulation_rhs_with_wake(&lattice, &v_w, &ctx.flow, &v_s)?;
    let a = assemble_influence_matrix(&lattice, cfg.cutoff_delta);
    let gamma = solve_circulations(&a, &rhs)?;
    lattice.set_gammas(&gamma)?;
    let panel_forces = compute_loads(&lattice, &ctx.gamma_prev, &ctx.flow, ctx.dt, &v_s, &v_w)?;
    let f_ae = generalized_aero_forces(map, &lattice, &panel_forces)?;
    Ok(AeroEvaluation {
        f_ae,
        total_force: total_force(&panel_forces),
        lattice,
        panel_forces,
    })
}

/// `(−∂f_ae/∂q, −∂f_ae/∂s)` by central differences with `h_i = fd_eps (1 + |y_i|)`.
pub fn aero_jacobian(
    ctx: &AeroForceContext,
    map: &TransferMap,
    q: &[f64],
    s: &[f64],
    fd_eps: f64,
) -> Result<(DenseMatrix, DenseMatrix), CouplingError> {
    let n = q.len();
    check_len(n, s.len())?;
    let mut k_qq = DenseMatrix::zeros(n, n);
    let mut k_qs = DenseMatrix::zeros(n, n);
    let mut qq = q.to_vec();
    let mut ss = s.to_vec();
    for col in 0..2 * n {
        let (target, block, j) = if col < n {
            (&mut qq, &mut k_qq, col)
        } else {
            (&mut ss, &mut k_qs, col - n)
        };
        let y0 = target[j];
        let h = fd_eps * (1.0 + y0.abs());
        target[j] = y0 + h;
        let (qp, sp) = (qq.clone(), ss.clone());
        let fp = aero_force_function(ctx, map, &qp, &sp)?.f_ae;
        let target = if col < n { &mut qq } else { &mut ss };
        target[j] = y0 - h;
        let fm = aero_force_function(ctx, map, &qq, &ss)?.f_ae;
        let target = if col < n { &mut qq } else { &mut ss };
        target[j] = y0;
        let column: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| -(a - b) / (2.0 * h)).collect();
        if column.iter().any(|v| !v.is_finite()) {
            return Err(CouplingError::NonFiniteDerivative { column: col });
        }
        block.set_column(j, &column)?;
    }
    Ok((k_qq, k_qs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{RibbonModel, RibbonParams};
    use crate::uvlm::flat_plate_nodes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(m_s: usize, m_a: usize, n_a: usize) -> (RibbonModel, TransferMap, UvlmConfig) {
        let model = RibbonModel::new(RibbonParams::aluminium_plate(m_s)).unwrap();
        let aero = flat_plate_nodes(10.0, 1.0, m_a, n_a);
        let map = build_transfer_map(model.reference_positions(), &aero, 0.501).unwrap();
        let cfg = UvlmConfig {
            cutoff_delta: 0.01,
            span_panels: m_a,
            chord_panels: n_a,
        };
        (model, map, cfg)
    }

    fn random(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn bump_values() {
        assert_eq!(bump_weight(0.0, 0.5), 1.0);
        assert_eq!(bump_weight(0.5, 0.5), 0.0);
        assert_eq!(bump_weight(0.7, 0.5), 0.0);
        assert!((bump_weight(0.25, 0.5) - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-15);
        assert!((bump_weight(0.25, 0.5) - 0.71653).abs() < 1e-5);
        let mut last = 1.0;
        for i in 1..100 {
            let w = bump_weight(i as f64 * 0.005, 0.5);
            assert!(w < last);
            last = w;
        }
    }

    #[test]
    fn plate_map_covers_and_normalizes() {
        let (model, map, _) = setup(50, 50, 4);
        assert_eq!(map.aero_count(), 51 * 5);
        for a in 0..map.aero_count() {
            let sum: f64 = map.row(a).iter().map(|(_, w)| w).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for (j, _) in map.row(a) {
                let d = (map.aero_reference()[a] - model.reference_positions()[*j]).norm();
                assert!(d < 0.501);
            }
        }
    }

    #[test]
    fn coincident_meshes_give_identity() {
        let nodes: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let map = build_transfer_map(&nodes, &nodes, 0.9).unwrap();
        let w = map.to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(w[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(
            build_transfer_map(&nodes, &[Vec3::new(0.5, 3.0, 0.0)], 0.9),
            Err(CouplingError::UncoveredAeroNode { node: 0 })
        );
    }

    #[test]
    fn kinematics_translation_and_rest() {
        let (model, map, _) = setup(10, 10, 2);
        let c = [0.25, -0.5, 0.125];
        let q: Vec<f64> = (0..model.dof()).map(|i| c[i % 3]).collect();
        let s = vec![0.0; model.dof()];
        let (pos, vel) = surface_kinematics(&map, &q, &s).unwrap();
        for (p, x) in pos.iter().zip(map.aero_reference()) {
            assert!((p - x - Vec3::new(c[0], c[1], c[2])).norm() < 1e-14);
        }
        assert!(vel.iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn kinematics_match_dense_product() {
        let (model, map, _) = setup(10, 10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random(model.dof(), 0.1, &mut rng);
        let (pos, _) = surface_kinematics(&map, &q, &q).unwrap();
        let w = map.to_dense();
        for d in 0..3 {
            let comp: Vec<f64> = (0..model.node_count()).map(|j| q[3 * j + d]).collect();
            let wu = w.matvec(&comp).unwrap();
            for (a, p) in pos.iter().enumerate() {
                assert!((p[d] - map.aero_reference()[a][d] - wu[a]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn force_and_work_consistency() {
        let (model, map, cfg) = setup(10, 10, 2);
        let lat = LatticeState::flat_plate(10.0, 1.0, cfg.span_panels, cfg.chord_panels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let forces: Vec<Vec3> = (0..lat.ring_count())
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f_ae = generalized_aero_forces(&map, &lat, &forces).unwrap();
        let total = total_force(&forces);
        for d in 0..3 {
            let s: f64 = f_ae.iter().skip(d).step_by(3).sum();
            assert!((s - total[d]).abs() <= 1e-12 * total.norm().max(1.0));
        }
        let mut nodal = vec![Vec3::zeros(); map.aero_count()];
        for (r, f) in forces.iter().enumerate() {
            for n in lat.corner_indices(r) {
                nodal[n] += f * 0.25;
            }
        }
        for _ in 0..100 {
            let dq = random(model.dof(), 1.0, &mut rng);
            let dx = map.interpolate(&dq).unwrap();
            let lhs: f64 = dq.iter().zip(&f_ae).map(|(a, b)| a * b).sum();
            let rhs: f64 = dx.iter().zip(&nodal).map(|(a, b)| a.dot(b)).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
        let zero = generalized_aero_forces(&map, &lat, &vec![Vec3::zeros(); lat.ring_count()]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    fn context(cfg: UvlmConfig, speed: f64, alpha_deg: f64) -> AeroForceContext {
        AeroForceContext {
            wake: WakeState::new(),
            gamma_prev: vec![0.0; cfg.span_panels * cfg.chord_panels],
            flow: FlowConditions::from_speed_alpha(speed, alpha_deg.to_radians(), 1.225).unwrap(),
            dt: 0.25 / 45.0,
            uvlm: cfg,
        }
    }

    #[test]
    fn no_flow_no_force() {
        let (model, map, cfg) = setup(10, 10, 2);
        let ctx = context(cfg, 0.0, 0.0);
        let z = vec![0.0; model.dof()];
        let ev = aero_force_function(&ctx, &map, &z, &z).unwrap();
        assert!(ev.f_ae.iter().all(|v| *v == 0.0));
        let (kqq, kqs) = aero_jacobian(&ctx, &map, &z, &z, 1e-6).unwrap();
        // moving through still air still sheds circulation through the
        // unsteady Bernoulli term, so only the position block vanishes
        assert!(kqq.max_abs() <= 1e-8, "{}", kqq.max_abs());
        assert!(kqs.max_abs() > 0.0);
        assert_eq!((kqq.n_rows(), kqq.n_cols(), kqs.n_cols()), (model.dof(), model.dof(), model.dof()));
    }

    #[test]
    fn lift_points_up_and_is_deterministic() {
        let (model, map, cfg) = setup(10, 10, 2);
        let ctx = context(cfg, 45.0, 15.0);
        let z = vec![0.0; model.dof()];
        let a = aero_force_function(&ctx, &map, &z, &z).unwrap();
        let b = aero_force_function(&ctx, &map, &z, &z).unwrap();
        let up: f64 = a.f_ae.iter().skip(2).step_by(3).sum();
        assert!(up > 0.0);
        assert_eq!(a.f_ae, b.f_ae);
    }

    #[test]
    fn jacobian_directional_consistency() {
        let (model, map, cfg) = setup(4, 4, 2);
        let ctx = context(cfg, 45.0, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random(model.dof(), 0.01, &mut rng);
        let s = random(model.dof(), 0.1, &mut rng);
        let (kqq, kqs) = aero_jacobian(&ctx, &map, &q, &s, 1e-6).unwrap();
        let dq = random(model.dof(), 1.0, &mut rng);
        let ds = random(model.dof(), 1.0, &mut rng);
        let mut pred = kqq.matvec(&dq).unwrap();
        for (p, v) in pred.iter_mut().zip(kqs.matvec(&ds).unwrap()) {
            *p += v;
        }
        let h = 1e-5;
        let shift = |v: &[f64], d: &[f64], t: f64| -> Vec<f64> { v.iter().zip(d).map(|(a, b)| a + t * b).collect() };
        let fp = aero_force_function(&ctx, &map, &shift(&q, &dq, h), &shift(&s, &ds, h)).unwrap().f_ae;
        let fm = aero_force_function(&ctx, &map, &shift(&q, &dq, -h), &shift(&s, &ds, -h)).unwrap().f_ae;
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| -(a - b) / (2.0 * h)).collect();
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in pred.iter().zip(&fd) {
            assert!((a - b).abs() <= 5e-5 * scale, "{a} vs {b}");
        }
    }
}
