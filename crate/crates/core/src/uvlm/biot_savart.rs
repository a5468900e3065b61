use std::f64::consts::PI;

use super::{UvlmError, Vec3};

/// Segments shorter than this are treated as degenerate.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-14;

const INV_4PI: f64 = 1.0 / (4.0 * PI);

/// Velocity induced at `p` by the straight vortex segment `a -> b` of strength `gamma`.
///
/// Returns zero when the perpendicular distance of `p` from the segment line
/// is below `delta` (hard cut-off) or `p` lies on the line.
pub fn segment_induced_velocity(a: &Vec3, b: &Vec3, p: &Vec3, gamma: f64, delta: f64) -> Result<Vec3, UvlmError> {
    let r0 = b - a;
    if r0.norm() < MIN_SEGMENT_LENGTH {
        return Err(UvlmError::DegenerateSegment);
    }
    Ok(unit_segment(a, b, p, delta) * gamma)
}

/// Unit-strength segment velocity; degenerate segments contribute nothing.
#[inline]
pub(crate) fn unit_segment(a: &Vec3, b: &Vec3, p: &Vec3, delta: f64) -> Vec3 {
    let r0 = b - a;
    let r1 = p - a;
    let r2 = p - b;
    let c = r1.cross(&r2);
    let c2 = c.norm_squared();
    let l2 = r0.norm_squared();
    if l2 < MIN_SEGMENT_LENGTH * MIN_SEGMENT_LENGTH {
        return Vec3::zeros();
    }
    // perpendicular distance d = |r1 x r2| / |r0|
    let cut = delta.max(1e-12 * l2.sqrt());
    if c2 <= cut * cut * l2 {
        return Vec3::zeros();
    }
    let n1 = r1.norm();
    let n2 = r2.norm();
    let k = r0.dot(&(r1 / n1 - r2 / n2)) * INV_4PI / c2;
    c * k
}

/// Velocity of a closed four-segment ring `c0 -> c1 -> c2 -> c3 -> c0`.
pub fn ring_induced_velocity(corners: &[Vec3; 4], gamma: f64, p: &Vec3, delta: f64) -> Result<Vec3, UvlmError> {
    let mut v = Vec3::zeros();
    for s in 0..4 {
        v += segment_induced_velocity(&corners[s], &corners[(s + 1) % 4], p, gamma, delta)?;
    }
    Ok(v)
}

/// A structured vortex sheet made of node lines and rings between them.
///
/// `lines[k][i]` is node `i` of line `k`; ring `(i, k)` spans nodes
/// `(i,k) -> (i+1,k) -> (i+1,k+1) -> (i,k+1)` and has circulation
/// `gammas[k][i]`. Shared edges are evaluated once with their net strength.
pub(crate) struct Sheet<'a> {
    pub lines: Vec<&'a [Vec3]>,
    pub gammas: Vec<&'a [f64]>,
}

impl Sheet<'_> {
    fn gamma(&self, i: isize, k: isize) -> f64 {
        if i < 0 || k < 0 {
            return 0.0;
        }
        let (i, k) = (i as usize, k as usize);
        match self.gammas.get(k) {
            Some(row) if i < row.len() => row[i],
            _ => 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Induced velocity at `p`.
    pub fn velocity(&self, p: &Vec3, delta: f64) -> Vec3 {
        let mut v = Vec3::zeros();
        if self.is_empty() {
            return v;
        }
        let m = self.lines[0].len() - 1;
        for (k, line) in self.lines.iter().enumerate() {
            let k = k as isize;
            for i in 0..m {
                let g = self.gamma(i as isize, k) - self.gamma(i as isize, k - 1);
                if g != 0.0 {
                    v += unit_segment(&line[i], &line[i + 1], p, delta) * g;
                }
            }
        }
        for k in 0..self.lines.len() - 1 {
            let (up, down) = (self.lines[k], self.lines[k + 1]);
            for i in 0..=m {
                let g = self.gamma(i as isize - 1, k as isize) - self.gamma(i as isize, k as isize);
                if g != 0.0 {
                    v += unit_segment(&up[i], &down[i], p, delta) * g;
                }
            }
        }
        v
    }

    /// Unit-ring normal-wash coefficients at `p`: `out[k*m + i] += (v_ring · n)`.
    pub fn unit_normalwash(&self, p: &Vec3, n: &Vec3, delta: f64, out: &mut [f64]) {
        let m = self.lines[0].len() - 1;
        let nk = self.gammas.len();
        for (k, line) in self.lines.iter().enumerate() {
            for i in 0..m {
                let w = unit_segment(&line[i], &line[i + 1], p, delta).dot(n);
                if k < nk {
                    out[k * m + i] += w;
                }
                if k > 0 {
                    out[(k - 1) * m + i] -= w;
                }
            }
        }
        for k in 0..nk {
            let (up, down) = (self.lines[k], self.lines[k + 1]);
            for i in 0..=m {
                let w = unit_segment(&up[i], &down[i], p, delta).dot(n);
                if i > 0 {
                    out[k * m + i - 1] += w;
                }
                if i < m {
                    out[k * m + i] -= w;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn collinear_point_gives_zero() {
        let r = segment_induced_velocity(&v(0., 0., 0.), &v(1., 0., 0.), &v(2., 0., 0.), 1.0, 0.0).unwrap();
        assert_eq!(r, Vec3::zeros());
        let r = segment_induced_velocity(&v(0., 0., 0.), &v(1., 0., 0.), &v(0.5, 0., 0.), 1.0, 0.0).unwrap();
        assert_eq!(r, Vec3::zeros());
    }

    #[test]
    fn reversal_negates_exactly() {
        let (a, b, p) = (v(0.1, -0.3, 0.2), v(1.3, 0.4, -0.7), v(0.3, 1.1, 0.9));
        let f = segment_induced_velocity(&a, &b, &p, 1.7, 0.0).unwrap();
        let r = segment_induced_velocity(&b, &a, &p, 1.7, 0.0).unwrap();
        assert_eq!(f, -r);
    }

    #[test]
    fn cutoff_fires() {
        let r = segment_induced_velocity(&v(0., 0., 0.), &v(1., 0., 0.), &v(0.5, 1., 0.), 1.0, 2.0).unwrap();
        assert_eq!(r, Vec3::zeros());
    }

    #[test]
    fn degenerate_segment_errors() {
        let a = v(1., 1., 1.);
        assert!(matches!(
            segment_induced_velocity(&a, &a, &v(0., 0., 0.), 1.0, 0.0),
            Err(UvlmError::DegenerateSegment)
        ));
    }

    #[test]
    fn zero_circulation_ring() {
        let c = [v(0., 0., 0.), v(0., 1., 0.), v(1., 1., 0.), v(1., 0., 0.)];
        assert_eq!(ring_induced_velocity(&c, 0.0, &v(0.3, 0.2, 0.5), 0.0).unwrap(), Vec3::zeros());
    }

    #[test]
    fn ring_mirror_symmetry() {
        let c = [v(0., 0., 0.), v(0., 1., 0.), v(1., 1., 0.), v(1., 0., 0.)];
        let up = ring_induced_velocity(&c, 1.0, &v(0.3, 0.2, 0.5), 0.0).unwrap();
        let dn = ring_induced_velocity(&c, 1.0, &v(0.3, 0.2, -0.5), 0.0).unwrap();
        assert!((up.z - dn.z).abs() < 1e-15);
        assert!((up.x + dn.x).abs() < 1e-15 && (up.y + dn.y).abs() < 1e-15);
    }

    #[test]
    fn sheet_matches_ring_sum() {
        // 2x2 sheet with distinct circulations against per-ring summation
        let lines: Vec<Vec<Vec3>> = (0..3)
            .map(|k| (0..3).map(|i| v(k as f64 * 0.5, i as f64, 0.05 * (i * k) as f64)).collect())
            .collect();
        let gammas = vec![vec![1.0, -0.5], vec![0.25, 2.0]];
        let sheet = Sheet {
            lines: lines.iter().map(Vec::as_slice).collect(),
            gammas: gammas.iter().map(Vec::as_slice).collect(),
        };
        let p = v(0.4, 0.7, 0.8);
        let mut expect = Vec3::zeros();
        for k in 0..2 {
            for i in 0..2 {
                let c = [lines[k][i], lines[k][i + 1], lines[k + 1][i + 1], lines[k + 1][i]];
                expect += ring_induced_velocity(&c, gammas[k][i], &p, 0.0).unwrap();
            }
        }
        assert!((sheet.velocity(&p, 0.0) - expect).norm() < 1e-14);

        let n = v(0.1, 0.2, 0.97).normalize();
        let mut coeff = vec![0.0; 4];
        sheet.unit_normalwash(&p, &n, 0.0, &mut coeff);
        for k in 0..2 {
            for i in 0..2 {
                let c = [lines[k][i], lines[k][i + 1], lines[k + 1][i + 1], lines[k + 1][i]];
                let w = ring_induced_velocity(&c, 1.0, &p, 0.0).unwrap().dot(&n);
                assert!((coeff[k * 2 + i] - w).abs() < 1e-14);
            }
        }
    }
}
