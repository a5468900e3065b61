use super::{check_len, DenseMatrix, LinalgError, SparseMatrix, SINGULAR_PIVOT_RTOL};

/// Diagnostics gathered while factorizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationInfo {
    /// `max |U| / max |A|`.
    pub pivot_growth: f64,
    /// `min |u_kk| / max |u_kk|`, a cheap reciprocal-condition indicator.
    pub rcond_estimate: f64,
}

impl FactorizationInfo {
    /// Pivot growth large enough that the estimate above is worth reporting.
    pub fn growth_detected(&self) -> bool {
        self.pivot_growth > 1e6
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub enum Factorization {
    Dense(DenseLu),
    Banded(BandedLu),
}

impl Factorization {
    pub fn dim(&self) -> usize {
        match self {
            Factorization::Dense(f) => f.n,
            Factorization::Banded(f) => f.n,
        }
    }

    pub fn info(&self) -> FactorizationInfo {
        match self {
            Factorization::Dense(f) => f.info,
            Factorization::Banded(f) => f.info,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.dim(), b.len())?;
        Ok(match self {
            Factorization::Dense(f) => f.solve_unchecked(b),
            Factorization::Banded(f) => f.solve_unchecked(b),
        })
    }
}

/// Row-pivoted `PA = LU` stored in place.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    info: FactorizationInfo,
}

impl DenseLu {
    fn solve_unchecked(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

fn check_square(rows: usize, cols: usize) -> Result<(), LinalgError> {
    if rows != cols {
        Err(LinalgError::NotSquare { rows, cols })
    } else {
        Ok(())
    }
}

fn pivot_info(diag: impl Iterator<Item = f64>, u_max: f64, a_max: f64) -> FactorizationInfo {
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for d in diag {
        dmin = dmin.min(d.abs());
        dmax = dmax.max(d.abs());
    }
    FactorizationInfo {
        pivot_growth: if a_max > 0.0 { u_max / a_max } else { 1.0 },
        rcond_estimate: if dmax > 0.0 { dmin / dmax } else { 0.0 },
    }
}

/// Dense LU with partial pivoting.
///
/// Fails with [`LinalgError::SingularMatrix`] when a pivot falls below
/// `1e-14` times the largest magnitude of the original row it came from.
pub fn factorize_dense(a: &DenseMatrix) -> Result<Factorization, LinalgError> {
    check_square(a.n_rows(), a.n_cols())?;
    let n = a.n_rows();
    for i in 0..n {
        for j in 0..n {
            if !a[(i, j)].is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
    }
    let row_max: Vec<f64> = (0..n)
        .map(|i| a.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let a_max = a.max_abs();
    let mut lu = a.as_slice().to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in k + 1..n {
            let v = lu[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        let threshold = SINGULAR_PIVOT_RTOL * row_max[perm[p]];
        if best == 0.0 || best < threshold {
            return Err(LinalgError::SingularMatrix {
                column: k,
                pivot: best,
                threshold,
            });
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            let l = lu[i * n + k] / pivot;
            lu[i * n + k] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    lu[i * n + j] -= l * lu[k * n + j];
                }
            }
        }
    }
    let u_max = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(lu[i * n + j].abs()));
    let info = pivot_info((0..n).map(|i| lu[i * n + i]), u_max, a_max);
    Ok(Factorization::Dense(DenseLu { n, lu, perm, info }))
}

/// Banded LU with partial pivoting on a symmetrically reordered matrix.
///
/// Rows of the band store columns `i - kl ..= i + kl + ku`; the extra `kl`
/// super-diagonals absorb fill from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    /// `order[new] = old` symmetric reordering.
    order: Vec<usize>,
    /// Row interchange performed at step k (LAPACK-style ipiv).
    ipiv: Vec<usize>,
    info: FactorizationInfo,
}

impl BandedLu {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn solve_unchecked(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.order.iter().map(|&o| b[o]).collect();
        // forward: apply interchanges and L multipliers column by column
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..(k + self.kl + 1).min(n) {
                    x[i] -= self.band[self.idx(i, k)] * xk;
                }
            }
        }
        let uw = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..(i + uw + 1).min(n) {
                s -= self.band[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.band[self.idx(i, i)];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern. Deterministic.
pub(crate) fn rcm_order(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in a.pattern() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (deg[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (deg[w], w));
            for w in nb {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Factorizes a sparse matrix.
///
/// The matrix is reordered with reverse Cuthill-McKee; if the resulting band
/// is narrow compared to `n` a banded LU is used, otherwise a dense one. Both
/// use partial pivoting and the same singularity test.
pub fn factorize_sparse(a: &SparseMatrix) -> Result<Factorization, LinalgError> {
    check_square(a.n_rows(), a.n_cols())?;
    a.check_finite()?;
    let n = a.n_rows();
    let order = rcm_order(a);
    let mut inv = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0usize, 0usize);
    for (i, j) in a.pattern() {
        let (ni, nj) = (inv[i], inv[j]);
        if ni > nj {
            kl = kl.max(ni - nj);
        } else {
            ku = ku.max(nj - ni);
        }
    }
    let width = 2 * kl + ku + 1;
    if 2 * width >= n {
        return factorize_dense(&a.to_dense());
    }

    let mut f = BandedLu {
        n,
        kl,
        ku,
        width,
        band: vec![0.0; n * width],
        order,
        ipiv: vec![0; n],
        info: FactorizationInfo {
            pivot_growth: 1.0,
            rcond_estimate: 1.0,
        },
    };
    let mut row_max = vec![0.0f64; n];
    for i in 0..n {
        for (j, v) in a.row(i) {
            let (ni, nj) = (inv[i], inv[j]);
            let k = f.idx(ni, nj);
            f.band[k] = v;
            row_max[ni] = row_max[ni].max(v.abs());
        }
    }
    let a_max = a.max_abs();
    // original (reordered) row currently sitting at position i
    let mut src: Vec<usize> = (0..n).collect();
    let uw = kl + ku;
    for k in 0..n {
        let last = (k + kl).min(n - 1);
        let mut p = k;
        let mut best = f.band[f.idx(k, k)].abs();
        for i in k + 1..=last {
            let v = f.band[f.idx(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        let threshold = SINGULAR_PIVOT_RTOL * row_max[src[p]];
        if best == 0.0 || best < threshold {
            return Err(LinalgError::SingularMatrix {
                column: k,
                pivot: best,
                threshold,
            });
        }
        f.ipiv[k] = p;
        let jend = (k + uw).min(n - 1);
        if p != k {
            for j in k..=jend {
                let (a1, a2) = (f.idx(k, j), f.idx(p, j));
                f.band.swap(a1, a2);
            }
            src.swap(k, p);
        }
        let pivot = f.band[f.idx(k, k)];
        for i in k + 1..=last {
            let ik = f.idx(i, k);
            let l = f.band[ik] / pivot;
            f.band[ik] = l;
            if l != 0.0 {
                for j in k + 1..=jend {
                    let kj = f.band[f.idx(k, j)];
                    let ij = f.idx(i, j);
                    f.band[ij] -= l * kj;
                }
            }
        }
    }
    let mut u_max = 0.0f64;
    for i in 0..n {
        for j in i..(i + uw + 1).min(n) {
            u_max = u_max.max(f.band[f.idx(i, j)].abs());
        }
    }
    f.info = pivot_info((0..n).map(|i| f.band[f.idx(i, i)]), u_max, a_max);
    Ok(Factorization::Banded(f))
}
