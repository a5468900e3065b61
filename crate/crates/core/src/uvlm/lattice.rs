use super::biot_savart::Sheet;
use super::{UvlmError, Vec3};

/// Geometry and circulation of a single bound vortex ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub gamma: f64,
    /// Ring center, which sits on the 3/4-chord line of the underlying panel.
    pub collocation: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub chord_tangent: Vec3,
    pub span_tangent: Vec3,
    pub chord_length: f64,
    pub span_length: f64,
}

/// Bound vortex lattice: `(span_panels + 1) x (chord_panels + 1)` corner nodes.
///
/// Nodes are stored line by line along the chord: node `(i, k)` (span index
/// `i`, chord index `k`) lives at `k * (span_panels + 1) + i`. Ring `(i, k)`
/// lives at `k * span_panels + i`, so each chordwise row of rings is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    span_panels: usize,
    chord_panels: usize,
    nodes: Vec<Vec3>,
    rings: Vec<Ring>,
    gammas: Vec<f64>,
}

impl LatticeState {
    pub fn from_nodes(span_panels: usize, chord_panels: usize, nodes: Vec<Vec3>) -> Result<Self, UvlmError> {
        if span_panels == 0 || chord_panels == 0 {
            return Err(UvlmError::InvalidConfig("lattice needs at least one ring".into()));
        }
        let expected = (span_panels + 1) * (chord_panels + 1);
        if nodes.len() != expected {
            return Err(UvlmError::DimensionMismatch {
                expected,
                found: nodes.len(),
            });
        }
        let mut lat = Self {
            span_panels,
            chord_panels,
            nodes,
            rings: Vec::with_capacity(span_panels * chord_panels),
            gammas: vec![0.0; span_panels * chord_panels],
        };
        for k in 0..chord_panels {
            for i in 0..span_panels {
                let ring = lat.ring_geometry(i, k)?;
                lat.rings.push(ring);
            }
        }
        Ok(lat)
    }

    /// Flat lattice in the `z = 0` plane, span along `+y`, chord along `+x`.
    ///
    /// Ring corners sit a quarter panel behind each panel's leading edge, so the
    /// last line lies a quarter panel behind the trailing edge.
    pub fn flat_plate(span: f64, chord: f64, span_panels: usize, chord_panels: usize) -> Result<Self, UvlmError> {
        Self::from_nodes(
            span_panels,
            chord_panels,
            flat_plate_nodes(span, chord, span_panels, chord_panels),
        )
    }

    fn ring_geometry(&self, i: usize, k: usize) -> Result<Ring, UvlmError> {
        let c = self.corners(i, k);
        let d1 = c[2] - c[0];
        let d2 = c[3] - c[1];
        let cross = d2.cross(&d1);
        let cn = cross.norm();
        let chord_vec = (c[2] + c[3] - c[0] - c[1]) * 0.5;
        let span_vec = (c[1] + c[2] - c[0] - c[3]) * 0.5;
        let (chord_length, span_length) = (chord_vec.norm(), span_vec.norm());
        if !(cn > 0.0 && chord_length > 0.0 && span_length > 0.0) || !cn.is_finite() {
            return Err(UvlmError::DegenerateRing { span: i, chord: k });
        }
        Ok(Ring {
            gamma: 0.0,
            collocation: (c[0] + c[1] + c[2] + c[3]) * 0.25,
            normal: cross / cn,
            area: 0.5 * cn,
            chord_tangent: chord_vec / chord_length,
            span_tangent: span_vec / span_length,
            chord_length,
            span_length,
        })
    }

    pub fn span_panels(&self) -> usize {
        self.span_panels
    }

    pub fn chord_panels(&self) -> usize {
        self.chord_panels
    }

    pub fn ring_count(&self) -> usize {
        self.rings.len()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node(&self, i: usize, k: usize) -> Vec3 {
        self.nodes[k * (self.span_panels + 1) + i]
    }

    /// Nodes on chordwise line `k`.
    pub fn line(&self, k: usize) -> &[Vec3] {
        let w = self.span_panels + 1;
        &self.nodes[k * w..(k + 1) * w]
    }

    pub fn trailing_edge(&self) -> &[Vec3] {
        self.line(self.chord_panels)
    }

    pub fn ring_index(&self, i: usize, k: usize) -> usize {
        k * self.span_panels + i
    }

    /// Corners in traversal order `(i,k) -> (i+1,k) -> (i+1,k+1) -> (i,k+1)`.
    pub fn corners(&self, i: usize, k: usize) -> [Vec3; 4] {
        [self.node(i, k), self.node(i + 1, k), self.node(i + 1, k + 1), self.node(i, k + 1)]
    }

    /// Node indices of ring `r` in traversal order.
    pub fn corner_indices(&self, r: usize) -> [usize; 4] {
        let (i, k) = (r % self.span_panels, r / self.span_panels);
        let w = self.span_panels + 1;
        [k * w + i, k * w + i + 1, (k + 1) * w + i + 1, (k + 1) * w + i]
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn collocation_points(&self) -> Vec<Vec3> {
        self.rings.iter().map(|r| r.collocation).collect()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn set_gammas(&mut self, gammas: &[f64]) -> Result<(), UvlmError> {
        if gammas.len() != self.rings.len() {
            return Err(UvlmError::DimensionMismatch {
                expected: self.rings.len(),
                found: gammas.len(),
            });
        }
        self.gammas.copy_from_slice(gammas);
        for (r, g) in self.rings.iter_mut().zip(gammas) {
            r.gamma = *g;
        }
        Ok(())
    }

    /// Circulations of the last chordwise row of rings.
    pub fn trailing_edge_gammas(&self) -> &[f64] {
        let m = self.span_panels;
        &self.gammas[(self.chord_panels - 1) * m..]
    }

    pub(crate) fn sheet(&self) -> Sheet<'_> {
        let m = self.span_panels;
        Sheet {
            lines: (0..=self.chord_panels).map(|k| self.line(k)).collect(),
            gammas: (0..self.chord_panels).map(|k| &self.gammas[k * m..(k + 1) * m]).collect(),
        }
    }

    /// Velocity induced by the bound rings at `p`.
    pub fn induced_velocity(&self, p: &Vec3, delta: f64) -> Vec3 {
        self.sheet().velocity(p, delta)
    }
}

pub fn flat_plate_nodes(span: f64, chord: f64, span_panels: usize, chord_panels: usize) -> Vec<Vec3> {
    let dc = chord / chord_panels as f64;
    let ds = span / span_panels as f64;
    let mut nodes = Vec::with_capacity((span_panels + 1) * (chord_panels + 1));
    for k in 0..=chord_panels {
        for i in 0..=span_panels {
            nodes.push(Vec3::new((k as f64 + 0.25) * dc, i as f64 * ds, 0.0));
        }
    }
    nodes
}

/// One shed row of wake rings.
///
/// `line` is the row's downstream node line; its upstream line is the next
/// newer row's line, or the lattice trailing edge for the newest row.
#[derive(Debug, Clone, PartialEq)]
pub struct WakeRow {
    pub line: Vec<Vec3>,
    pub gamma: Vec<f64>,
}

/// Free wake, oldest row first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WakeState {
    pub rows: Vec<WakeRow>,
}

impl WakeState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sheet ordered downstream from the trailing edge.
    pub(crate) fn sheet<'a>(&'a self, trailing_edge: &'a [Vec3]) -> Sheet<'a> {
        let mut lines = Vec::with_capacity(self.rows.len() + 1);
        let mut gammas = Vec::with_capacity(self.rows.len());
        if !self.rows.is_empty() {
            lines.push(trailing_edge);
            for row in self.rows.iter().rev() {
                lines.push(row.line.as_slice());
                gammas.push(row.gamma.as_slice());
            }
        }
        Sheet { lines, gammas }
    }

    /// Velocity induced by the wake at `p`; the newest row is closed by `trailing_edge`.
    pub fn induced_velocity(&self, trailing_edge: &[Vec3], p: &Vec3, delta: f64) -> Vec3 {
        self.sheet(trailing_edge).velocity(p, delta)
    }
}
