use super::{
    assemble_influence_matrix, circulation_rhs_with_wake, compute_loads, convect_wake, lift_coefficient,
    max_normal_velocity, shed_wake, total_force, wake_velocity_at_rings, FlowConditions, LatticeState, UvlmConfig,
    UvlmError, Vec3, WakeState,
};
use crate::linalg;

/// Per-step record of a rigid-surface run.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidStep {
    pub time: f64,
    pub cl: f64,
    pub total_force: Vec3,
    /// Largest relative normal velocity at ring centers after the circulation solve.
    pub max_normal_velocity: f64,
    pub wake_rows: usize,
}

/// Impulsively started fixed lattice: solve, load, shed and convect for `steps` steps.
///
/// The influence matrix is factorized once since the geometry never changes.
pub fn simulate_rigid(
    lattice: &LatticeState,
    flow: &FlowConditions,
    cfg: &UvlmConfig,
    dt: f64,
    steps: usize,
    ref_area: f64,
) -> Result<Vec<RigidStep>, UvlmError> {
    cfg.validate()?;
    let mut lat = lattice.clone();
    let n = lat.ring_count();
    let still = vec![Vec3::zeros(); n];
    let a = assemble_influence_matrix(&lat, cfg.cutoff_delta);
    let lu = linalg::factorize_dense(&a)?;
    let lift_dir = flow.lift_direction();
    let mut wake = WakeState::new();
    let mut gamma_prev = vec![0.0; n];
    let mut out = Vec::with_capacity(steps);
    for step in 1..=steps {
        let vw = wake_velocity_at_rings(&lat, &wake, cfg.cutoff_delta);
        let rhs = circulation_rhs_with_wake(&lat, &vw, flow, &still)?;
        let gam = lu.solve(&rhs)?;
        lat.set_gammas(&gam)?;
        let forces = compute_loads(&lat, &gamma_prev, flow, dt, &still, &vw)?;
        let total = total_force(&forces);
        out.push(RigidStep {
            time: step as f64 * dt,
            cl: lift_coefficient(&total, flow, ref_area, &lift_dir)?,
            total_force: total,
            max_normal_velocity: max_normal_velocity(&lat, &wake, flow, &still, cfg.cutoff_delta),
            wake_rows: wake.row_count(),
        });
        wake = shed_wake(&lat, &wake);
        wake = convect_wake(&lat, &wake, flow, dt, cfg.cutoff_delta)?;
        gamma_prev = gam;
    }
    Ok(out)
}
