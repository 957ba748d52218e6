#![allow(dead_code)]

use flashgate::linalg::DenseMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

pub fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// Singular values from nalgebra's bidiagonal QR SVD, descending.
pub fn reference_singular_values(m: &DenseMatrix) -> Vec<f64> {
    let svd = to_nalgebra(m).svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `C(x) = Σ_i |u_xi σ_i|` from the reference decomposition, keeping every
/// singular value above `tol · σ_max`.
pub fn reference_scores(m: &DenseMatrix, tol: f64) -> Vec<f64> {
    let svd = to_nalgebra(m).svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    (0..m.rows())
        .map(|x| {
            svd.singular_values
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > tol * smax)
                .map(|(i, &s)| (u[(x, i)] * s).abs())
                .sum()
        })
        .collect()
}

/// Row-energy retention: with the full effective rank, a token's energy in
/// the singular basis equals its squared row norm.
pub fn row_norm_retention(m: &DenseMatrix, subset: &[usize]) -> f64 {
    subset
        .iter()
        .map(|&x| m.row(x).iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// Indices of the `k` largest values by a full sort, ties to lower index.
pub fn sort_top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let mut top = idx[..k].to_vec();
    top.sort();
    top
}
