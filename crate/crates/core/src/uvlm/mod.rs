//! Unsteady vortex-lattice aerodynamics.
//!
//! A lifting surface is a lattice of vortex rings whose circulations follow
//! from the non-penetration condition at the ring centers. Each time step the
//! trailing-edge circulations are shed into a free wake that is convected with
//! the local flow. Panel loads come from a discrete unsteady Bernoulli relation.

mod biot_savart;
mod lattice;
mod rigid;

pub use biot_savart::{ring_induced_velocity, segment_induced_velocity, MIN_SEGMENT_LENGTH};
pub use lattice::{flat_plate_nodes, LatticeState, Ring, WakeRow, WakeState};
pub use rigid::{simulate_rigid, RigidStep};

use nalgebra::Vector3;
use thiserror::Error;

use crate::linalg::{self, DenseMatrix, LinalgError};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UvlmError {
    #[error("degenerate vortex segment")]
    DegenerateSegment,
    #[error("degenerate vortex ring at span {span}, chord {chord}")]
    DegenerateRing { span: usize, chord: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero dynamic pressure")]
    ZeroDynamicPressure,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Free-stream state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConditions {
    pub v_inf: Vec3,
    pub rho: f64,
}

impl FlowConditions {
    pub fn new(v_inf: Vec3, rho: f64) -> Result<Self, UvlmError> {
        if !(rho > 0.0) {
            return Err(UvlmError::InvalidConfig(format!("fluid density must be positive, got {rho}")));
        }
        Ok(Self { v_inf, rho })
    }

    /// Flow of magnitude `speed` in the x-z plane at angle of attack `alpha` [rad].
    pub fn from_speed_alpha(speed: f64, alpha: f64, rho: f64) -> Result<Self, UvlmError> {
        Self::new(Vec3::new(alpha.cos(), 0.0, alpha.sin()) * speed, rho)
    }

    pub fn dynamic_pressure(&self) -> f64 {
        0.5 * self.rho * self.v_inf.norm_squared()
    }

    /// Unit vector normal to the free stream in the x-z plane, pointing towards +z.
    pub fn lift_direction(&self) -> Vec3 {
        let v = self.v_inf.norm();
        if v == 0.0 {
            return Vec3::z();
        }
        let d = self.v_inf / v;
        (Vec3::z() - d * d.z).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvlmConfig {
    /// Hard cut-off length [m].
    pub cutoff_delta: f64,
    pub span_panels: usize,
    pub chord_panels: usize,
}

impl UvlmConfig {
    pub fn validate(&self) -> Result<(), UvlmError> {
        if !(self.cutoff_delta >= 0.0) {
            return Err(UvlmError::InvalidConfig("cutoff_delta must be >= 0".into()));
        }
        if self.span_panels == 0 || self.chord_panels == 0 {
            return Err(UvlmError::InvalidConfig("panel counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Normal-wash influence matrix: `A[i][j]` is the normal velocity at ring
/// center `i` induced by ring `j` with unit circulation.
pub fn assemble_influence_matrix(lattice: &LatticeState, delta: f64) -> DenseMatrix {
    let n = lattice.ring_count();
    let mut a = DenseMatrix::zeros(n, n);
    let sheet = lattice.sheet();
    for (i, ring) in lattice.rings().iter().enumerate() {
        sheet.unit_normalwash(&ring.collocation, &ring.normal, delta, a.row_mut(i));
    }
    a
}

/// Wake-induced velocity at every ring center.
pub fn wake_velocity_at_rings(lattice: &LatticeState, wake: &WakeState, delta: f64) -> Vec<Vec3> {
    if wake.is_empty() {
        return vec![Vec3::zeros(); lattice.ring_count()];
    }
    let sheet = wake.sheet(lattice.trailing_edge());
    lattice
        .rings()
        .iter()
        .map(|r| sheet.velocity(&r.collocation, delta))
        .collect()
}

/// `rhs[i] = -(v_inf + v_wake - v_S) · n_i` at each ring center.
pub fn circulation_rhs(
    lattice: &LatticeState,
    wake: &WakeState,
    flow: &FlowConditions,
    surface_velocity: &[Vec3],
    delta: f64,
) -> Result<Vec<f64>, UvlmError> {
    let wake_vel = wake_velocity_at_rings(lattice, wake, delta);
    circulation_rhs_with_wake(lattice, &wake_vel, flow, surface_velocity)
}

/// As [`circulation_rhs`] with precomputed wake velocities.
pub fn circulation_rhs_with_wake(
    lattice: &LatticeState,
    wake_velocity: &[Vec3],
    flow: &FlowConditions,
    surface_velocity: &[Vec3],
) -> Result<Vec<f64>, UvlmError> {
    let n = lattice.ring_count();
    for len in [surface_velocity.len(), wake_velocity.len()] {
        if len != n {
            return Err(UvlmError::DimensionMismatch { expected: n, found: len });
        }
    }
    Ok(lattice
        .rings()
        .iter()
        .zip(wake_velocity)
        .zip(surface_velocity)
        .map(|((r, vw), vs)| -(flow.v_inf + vw - vs).dot(&r.normal))
        .collect())
}

pub fn solve_circulations(a: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>, UvlmError> {
    let f = linalg::factorize_dense(a)?;
    Ok(f.solve(rhs)?)
}

/// Largest relative normal velocity `|(v_inf + v_bound + v_wake - v_S) · n|` over ring centers.
pub fn max_normal_velocity(
    lattice: &LatticeState,
    wake: &WakeState,
    flow: &FlowConditions,
    surface_velocity: &[Vec3],
    delta: f64,
) -> f64 {
    let bound = lattice.sheet();
    let wake_sheet = wake.sheet(lattice.trailing_edge());
    lattice
        .rings()
        .iter()
        .zip(surface_velocity)
        .map(|(r, vs)| {
            let v = flow.v_inf + bound.velocity(&r.collocation, delta) + wake_sheet.velocity(&r.collocation, delta) - vs;
            v.dot(&r.normal).abs()
        })
        .fold(0.0, f64::max)
}

/// Appends one wake row carrying the current trailing-edge circulations.
/// The new row's downstream line starts on the trailing edge.
pub fn shed_wake(lattice: &LatticeState, wake: &WakeState) -> WakeState {
    let mut next = wake.clone();
    next.rows.push(WakeRow {
        line: lattice.trailing_edge().to_vec(),
        gamma: lattice.trailing_edge_gammas().to_vec(),
    });
    next
}

/// Moves every free wake node by `dt * (v_inf + v_bound + v_wake)` (forward Euler).
///
/// All velocities are evaluated on the pre-convection geometry.
pub fn convect_wake(
    lattice: &LatticeState,
    wake: &WakeState,
    flow: &FlowConditions,
    dt: f64,
    delta: f64,
) -> Result<WakeState, UvlmError> {
    if !(dt > 0.0) {
        return Err(UvlmError::InvalidConfig("dt must be positive".into()));
    }
    let bound = lattice.sheet();
    let wsheet = wake.sheet(lattice.trailing_edge());
    let mut next = wake.clone();
    for (row, new_row) in wake.rows.iter().zip(next.rows.iter_mut()) {
        for (p, out) in row.line.iter().zip(new_row.line.iter_mut()) {
            let v = flow.v_inf + bound.velocity(p, delta) + wsheet.velocity(p, delta);
            *out = p + v * dt;
        }
    }
    Ok(next)
}

/// Per-ring pressure-jump forces from the discrete unsteady Bernoulli relation.
///
/// `Δp = ρ [ (v·τc)(Γ_ik − Γ_i,k−1)/Δc + (v·τs)(Γ_ik − Γ_i−1,k)/Δs + (Γ_ik − Γ_prev)/Δt ]`
/// with `v = v_inf + v_wake − v_S` at the ring center and missing neighbors
/// taken as zero. The force is `Δp · area · n`.
pub fn compute_loads(
    lattice: &LatticeState,
    gamma_prev: &[f64],
    flow: &FlowConditions,
    dt: f64,
    surface_velocity: &[Vec3],
    wake_velocity: &[Vec3],
) -> Result<Vec<Vec3>, UvlmError> {
    let n = lattice.ring_count();
    for len in [gamma_prev.len(), surface_velocity.len(), wake_velocity.len()] {
        if len != n {
            return Err(UvlmError::DimensionMismatch { expected: n, found: len });
        }
    }
    if !(dt > 0.0) {
        return Err(UvlmError::InvalidConfig("dt must be positive".into()));
    }
    let m = lattice.span_panels();
    let g = lattice.gammas();
    let mut forces = Vec::with_capacity(n);
    for (r, ring) in lattice.rings().iter().enumerate() {
        let (i, k) = (r % m, r / m);
        let g_up = if k > 0 { g[r - m] } else { 0.0 };
        let g_side = if i > 0 { g[r - 1] } else { 0.0 };
        let v = flow.v_inf + wake_velocity[r] - surface_velocity[r];
        let dp = flow.rho
            * (v.dot(&ring.chord_tangent) * (g[r] - g_up) / ring.chord_length
                + v.dot(&ring.span_tangent) * (g[r] - g_side) / ring.span_length
                + (g[r] - gamma_prev[r]) / dt);
        forces.push(ring.normal * (dp * ring.area));
    }
    Ok(forces)
}

pub fn total_force(forces: &[Vec3]) -> Vec3 {
    forces.iter().fold(Vec3::zeros(), |a, f| a + f)
}

/// `C_L = F·l / (½ ρ |v_inf|² S)`.
pub fn lift_coefficient(total_force: &Vec3, flow: &FlowConditions, ref_area: f64, lift_direction: &Vec3) -> Result<f64, UvlmError> {
    let q = flow.dynamic_pressure();
    if !(q > 0.0) || !(ref_area > 0.0) {
        return Err(UvlmError::ZeroDynamicPressure);
    }
    Ok(total_force.dot(lift_direction) / (q * ref_area))
}
