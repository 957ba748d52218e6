use super::matrix::DenseMatrix;
use super::{dot, norm};
use crate::error::{invalid, Result};

/// Relative cutoff used to decide the effective rank when the caller has no
/// better value.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition truncated to the effective rank.
///
/// `u` is `rows x rank` and `v` is `cols x rank`, both stored row-major. The
/// largest-magnitude entry of every column of `u` is non-negative (ties go to
/// the lowest row), which makes the factors unique for distinct singular
/// values.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    rows: usize,
    cols: usize,
    rank: usize,
    sigma: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl SvdFactors {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of singular values above the relative tolerance.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Singular values, non-increasing.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Entry `(row, k)` of the left factor.
    #[inline]
    pub fn u(&self, row: usize, k: usize) -> f64 {
        self.u[row * self.rank + k]
    }

    /// Entry `(row, k)` of the right factor.
    #[inline]
    pub fn v(&self, row: usize, k: usize) -> f64 {
        self.v[row * self.rank + k]
    }

    /// Row `row` of the left factor: the coordinates of token `row` in the
    /// left singular basis.
    pub fn u_row(&self, row: usize) -> &[f64] {
        &self.u[row * self.rank..(row + 1) * self.rank]
    }

    pub fn u_column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.u(r, k)).collect()
    }

    pub fn v_column(&self, k: usize) -> Vec<f64> {
        (0..self.cols).map(|r| self.v(r, k)).collect()
    }

    /// `U * diag(sigma) * V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[r * self.cols + c] = (0..self.rank)
                    .map(|k| self.u(r, k) * self.sigma[k] * self.v(c, k))
                    .sum();
            }
        }
        DenseMatrix::new(self.rows, self.cols, data).expect("reconstruction is finite")
    }
}

/// Decomposes `matrix` with one-sided (Hestenes) Jacobi rotations applied to
/// the thinner dimension.
///
/// The effective rank is the number of singular values strictly greater than
/// `rank_tolerance * sigma_max`; the zero matrix has rank 0.
pub fn svd_decompose(matrix: &DenseMatrix, rank_tolerance: f64) -> Result<SvdFactors> {
    if !(rank_tolerance > 0.0 && rank_tolerance < 1.0) {
        return invalid(format!(
            "rank tolerance must lie in (0, 1), got {rank_tolerance}"
        ));
    }
    let transposed = matrix.rows() < matrix.cols();
    let work = if transposed {
        matrix.transpose()
    } else {
        matrix.clone()
    };
    let (m, n) = (work.rows(), work.cols());

    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| work.get(i, j)).collect())
        .collect();
    let mut rot: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * m as f64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut rot, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let sigma_max = norms[order[0]];
    let rank = if sigma_max > 0.0 {
        order
            .iter()
            .take_while(|&&j| norms[j] > rank_tolerance * sigma_max)
            .count()
            .max(1)
    } else {
        0
    };

    let sigma: Vec<f64> = order[..rank].iter().map(|&j| norms[j]).collect();
    let mut normalized: Vec<Vec<f64>> = order[..rank]
        .iter()
        .map(|&j| cols[j].iter().map(|x| x / norms[j]).collect())
        .collect();
    reorthogonalize(&mut normalized);
    let rotations: Vec<Vec<f64>> = order[..rank].iter().map(|&j| rot[j].clone()).collect();

    let (mut left, mut right) = if transposed {
        (rotations, normalized)
    } else {
        (normalized, rotations)
    };
    for (l, r) in left.iter_mut().zip(right.iter_mut()) {
        let pivot = l.iter().enumerate().fold(
            0,
            |best, (i, x)| if x.abs() > l[best].abs() { i } else { best },
        );
        if l[pivot] < 0.0 {
            l.iter_mut().for_each(|x| *x = -*x);
            r.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(SvdFactors {
        rows: matrix.rows(),
        cols: matrix.cols(),
        rank,
        sigma,
        u: pack_columns(&left, matrix.rows()),
        v: pack_columns(&right, matrix.cols()),
    })
}

fn rotate(vecs: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = vecs.split_at_mut(q);
    let (vp, vq) = (&mut head[p], &mut tail[0]);
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// One modified Gram-Schmidt pass. Columns arrive nearly orthonormal, so this
/// only removes rounding drift for small singular values.
fn reorthogonalize(vecs: &mut [Vec<f64>]) {
    for k in 0..vecs.len() {
        let (done, rest) = vecs.split_at_mut(k);
        let cur = &mut rest[0];
        for prev in done.iter() {
            let proj = dot(prev, cur);
            cur.iter_mut().zip(prev).for_each(|(x, p)| *x -= proj * p);
        }
        let n = norm(cur);
        if n > 0.0 {
            cur.iter_mut().for_each(|x| *x /= n);
        }
    }
}

fn pack_columns(columns: &[Vec<f64>], len: usize) -> Vec<f64> {
    let r = columns.len();
    let mut out = vec![0.0; len * r];
    for (k, col) in columns.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            out[i * r + k] = *x;
        }
    }
    out
}
