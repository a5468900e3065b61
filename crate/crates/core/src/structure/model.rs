use nalgebra::{Matrix3, Vector3};

use super::{check_len, StructureError};
use crate::linalg::{SparseMatrix, TripletBuilder};

type Vec3 = Vector3<f64>;

/// How two-node springs measure deformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpringLaw {
    /// `½ k (ℓ − ℓ0)²`: geometrically nonlinear, rotation invariant.
    Geometric,
    /// `½ k |u_j − u_i|²`: quadratic in the coordinates.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Supports {
    /// Both ends hinged at mid-chord, twist held at the left end.
    Hinged,
    /// No constraints.
    Free,
}

/// Material, geometry and discretization of the ribbon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RibbonParams {
    pub length: f64,
    pub chord: f64,
    pub thickness: f64,
    pub youngs_modulus: f64,
    pub shear_modulus: f64,
    pub density: f64,
    /// Number of span-wise elements; there are `elements + 1` stations.
    pub elements: usize,
    pub law: SpringLaw,
    pub supports: Supports,
}

impl RibbonParams {
    /// Aluminium plate strip, 10 m x 1 m x 8 mm.
    pub fn aluminium_plate(elements: usize) -> Self {
        Self {
            length: 10.0,
            chord: 1.0,
            thickness: 0.008,
            youngs_modulus: 7.0e10,
            shear_modulus: 2.63e10,
            density: 2700.0,
            elements,
            law: SpringLaw::Geometric,
            supports: Supports::Hinged,
        }
    }

    fn validate(&self) -> Result<(), StructureError> {
        let pos = [
            ("length", self.length),
            ("chord", self.chord),
            ("thickness", self.thickness),
            ("youngs_modulus", self.youngs_modulus),
            ("shear_modulus", self.shear_modulus),
            ("density", self.density),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StructureError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.elements < 2 {
            return Err(StructureError::InvalidParams("need at least 2 span elements".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StretchSpring {
    pub i: usize,
    pub j: usize,
    pub stiffness: f64,
    /// Reference vector `X_j − X_i`.
    pub rest: Vec3,
}

/// `½ k |u_a − 2 u_b + u_c|²` on three consecutive chain nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BendSpring {
    pub nodes: [usize; 3],
    pub stiffness: f64,
}

const BEND_WEIGHTS: [f64; 3] = [1.0, -2.0, 1.0];

#[derive(Debug, Clone)]
pub struct RibbonModel {
    params: RibbonParams,
    reference: Vec<Vec3>,
    masses: Vec<f64>,
    springs: Vec<StretchSpring>,
    bends: Vec<BendSpring>,
    constraint_jacobian: SparseMatrix,
}

impl RibbonModel {
    pub fn new(params: RibbonParams) -> Result<Self, StructureError> {
        params.validate()?;
        let RibbonParams {
            length,
            chord,
            thickness: t,
            youngs_modulus: e,
            shear_modulus: g,
            density: rho,
            elements: ne,
            ..
        } = params;
        let h = length / ne as f64;
        let half = 0.5 * chord;
        let stations = ne + 1;
        let mut reference = Vec::with_capacity(2 * stations);
        let mut masses = Vec::with_capacity(2 * stations);
        for st in 0..stations {
            let trib = if st == 0 || st == ne { 0.5 * h } else { h };
            for x in [0.0, chord] {
                reference.push(Vec3::new(x, st as f64 * h, 0.0));
                masses.push(rho * half * t * trib);
            }
        }
        let k_stretch = e * half * t / h;
        let k_bend = e * half * t.powi(3) / 12.0 / h.powi(3);
        let mut springs = Vec::new();
        let mut push = |i: usize, j: usize, k: f64| {
            springs.push(StretchSpring {
                i,
                j,
                stiffness: k,
                rest: reference[j] - reference[i],
            });
        };
        for st in 0..stations {
            let trib = if st == 0 || st == ne { 0.5 * h } else { h };
            push(2 * st, 2 * st + 1, g * t * trib);
            if st < ne {
                push(2 * st, 2 * st + 2, k_stretch);
                push(2 * st + 1, 2 * st + 3, k_stretch);
                push(2 * st, 2 * st + 3, g * t * h);
                push(2 * st + 1, 2 * st + 2, g * t * h);
            }
        }
        let mut bends = Vec::new();
        for st in 1..ne {
            for chain in 0..2 {
                bends.push(BendSpring {
                    nodes: [2 * (st - 1) + chain, 2 * st + chain, 2 * (st + 1) + chain],
                    stiffness: k_bend,
                });
            }
        }
        let n_q = 3 * reference.len();
        let constraint_jacobian = match params.supports {
            Supports::Free => TripletBuilder::new(0, n_q).build(),
            Supports::Hinged => {
                let mut b = TripletBuilder::new(7, n_q);
                let (le0, te0) = (0, 1);
                let (le1, te1) = (2 * ne, 2 * ne + 1);
                for d in 0..3 {
                    b.add(d, 3 * le0 + d, 0.5);
                    b.add(d, 3 * te0 + d, 0.5);
                }
                b.add(3, 3 * te0 + 2, 1.0);
                b.add(3, 3 * le0 + 2, -1.0);
                for d in 0..3 {
                    b.add(4 + d, 3 * le1 + d, 0.5);
                    b.add(4 + d, 3 * te1 + d, 0.5);
                }
                b.build()
            }
        };
        Ok(Self {
            params,
            reference,
            masses,
            springs,
            bends,
            constraint_jacobian,
        })
    }

    /// Removes every spring, leaving free (or constrained) point masses.
    pub fn without_springs(mut self) -> Self {
        self.springs.clear();
        self.bends.clear();
        self
    }

    pub fn params(&self) -> &RibbonParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.reference.len()
    }

    pub fn dof(&self) -> usize {
        3 * self.reference.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraint_jacobian.n_rows()
    }

    pub fn stations(&self) -> usize {
        self.params.elements + 1
    }

    /// Node index of `chain` (0 leading edge, 1 trailing edge) at `station`.
    pub fn node(&self, station: usize, chain: usize) -> usize {
        2 * station + chain
    }

    pub fn reference_positions(&self) -> &[Vec3] {
        &self.reference
    }

    pub fn nodal_masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn springs(&self) -> &[StretchSpring] {
        &self.springs
    }

    pub fn bends(&self) -> &[BendSpring] {
        &self.bends
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Lumped diagonal mass matrix, each nodal mass repeated per coordinate.
    pub fn mass_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_diagonal(&self.mass_diagonal())
    }

    pub(crate) fn mass_diagonal(&self) -> Vec<f64> {
        self.masses.iter().flat_map(|m| [*m; 3]).collect()
    }

    fn disp(q: &[f64], node: usize) -> Vec3 {
        Vec3::new(q[3 * node], q[3 * node + 1], q[3 * node + 2])
    }

    /// Stretch `ℓ − ℓ0` and current vector `d` of a geometric spring, computed
    /// from displacement differences so large reference coordinates do not
    /// pollute small strains.
    fn stretch(s: &StretchSpring, q: &[f64]) -> (f64, Vec3) {
        let du = Self::disp(q, s.j) - Self::disp(q, s.i);
        let d = s.rest + du;
        let l = d.norm();
        let l0 = s.rest.norm();
        ((2.0 * s.rest.dot(&du) + du.dot(&du)) / (l + l0), d)
    }

    fn bend_vector(b: &BendSpring, q: &[f64]) -> Vec3 {
        let mut w = Vec3::zeros();
        for (n, c) in b.nodes.iter().zip(BEND_WEIGHTS) {
            w += Self::disp(q, *n) * c;
        }
        w
    }

    /// Total elastic energy.
    pub fn potential_energy(&self, q: &[f64]) -> Result<f64, StructureError> {
        check_len(self.dof(), q.len())?;
        let mut v = 0.0;
        for s in &self.springs {
            v += match self.params.law {
                SpringLaw::Geometric => {
                    let (eps, _) = Self::stretch(s, q);
                    0.5 * s.stiffness * eps * eps
                }
                SpringLaw::Linear => {
                    let du = Self::disp(q, s.j) - Self::disp(q, s.i);
                    0.5 * s.stiffness * du.norm_squared()
                }
            };
        }
        for b in &self.bends {
            v += 0.5 * b.stiffness * Self::bend_vector(b, q).norm_squared();
        }
        Ok(v)
    }

    /// `f_int = ∂V/∂q`.
    pub fn internal_forces(&self, q: &[f64]) -> Result<Vec<f64>, StructureError> {
        check_len(self.dof(), q.len())?;
        let mut f = vec![0.0; self.dof()];
        let mut add = |node: usize, v: Vec3| {
            for d in 0..3 {
                f[3 * node + d] += v[d];
            }
        };
        for s in &self.springs {
            let fj = match self.params.law {
                SpringLaw::Geometric => {
                    let (eps, d) = Self::stretch(s, q);
                    d * (s.stiffness * eps / d.norm())
                }
                SpringLaw::Linear => (Self::disp(q, s.j) - Self::disp(q, s.i)) * s.stiffness,
            };
            add(s.j, fj);
            add(s.i, -fj);
        }
        for b in &self.bends {
            let w = Self::bend_vector(b, q) * b.stiffness;
            for (n, c) in b.nodes.iter().zip(BEND_WEIGHTS) {
                add(*n, w * c);
            }
        }
        Ok(f)
    }

    /// Elastic Hessian `∂f_int/∂q`, symmetric, with a state-independent pattern.
    pub fn internal_stiffness(&self, q: &[f64]) -> Result<SparseMatrix, StructureError> {
        check_len(self.dof(), q.len())?;
        let n = self.dof();
        let mut b = TripletBuilder::with_capacity(n, n, 36 * self.springs.len() + 81 * self.bends.len());
        self.add_stiffness(q, 1.0, 0, &mut b);
        Ok(b.build())
    }

    /// Adds `scale · ∂f_int/∂q` into `b` with rows and columns shifted by `offset`.
    pub(crate) fn add_stiffness(&self, q: &[f64], scale: f64, offset: usize, b: &mut TripletBuilder) {
        let put = |b: &mut TripletBuilder, ni: usize, nj: usize, blk: &Matrix3<f64>| {
            for r in 0..3 {
                for c in 0..3 {
                    b.add(offset + 3 * ni + r, offset + 3 * nj + c, blk[(r, c)]);
                }
            }
        };
        for s in &self.springs {
            let blk = match self.params.law {
                SpringLaw::Geometric => {
                    let (eps, d) = Self::stretch(s, q);
                    let l = d.norm();
                    let e = d / l;
                    let eet = e * e.transpose();
                    (eet + (Matrix3::identity() - eet) * (eps / l)) * (s.stiffness * scale)
                }
                SpringLaw::Linear => Matrix3::identity() * (s.stiffness * scale),
            };
            put(b, s.i, s.i, &blk);
            put(b, s.j, s.j, &blk);
            put(b, s.i, s.j, &(-blk));
            put(b, s.j, s.i, &(-blk));
        }
        for bend in &self.bends {
            for (a, ca) in bend.nodes.iter().zip(BEND_WEIGHTS) {
                for (c, cc) in bend.nodes.iter().zip(BEND_WEIGHTS) {
                    let blk = Matrix3::identity() * (bend.stiffness * scale * ca * cc);
                    put(b, *a, *c, &blk);
                }
            }
        }
    }

    /// Stacked support conditions; zero in the reference configuration.
    pub fn constraints(&self, q: &[f64]) -> Result<Vec<f64>, StructureError> {
        check_len(self.dof(), q.len())?;
        Ok(self.constraint_jacobian.matvec(q).expect("dimension checked"))
    }

    /// `H_d = ∂h/∂q`; constant because all supports are linear.
    pub fn constraint_jacobian(&self) -> &SparseMatrix {
        &self.constraint_jacobian
    }
}
