//! Independent reference implementations shared by the integration tests.
//! Dense algebra here goes through nalgebra, never through the crate's own
//! kernels.

#![allow(dead_code)]

use dtc_core::linalg::Matrix;
use dtc_core::{DenseTensor, ObservationMask, Shape};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256StarStar;

pub type TestRng = Xoshiro256StarStar;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut TestRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rng: &mut TestRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_tensor(rng: &mut TestRng, dims: &[usize]) -> DenseTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let data = (0..shape.numel()).map(|_| gaussian(rng)).collect();
    DenseTensor::new(shape, data).unwrap()
}

pub fn random_mask(rng: &mut TestRng, shape: &Shape, p: f64) -> ObservationMask {
    let mut flags: Vec<bool> = (0..shape.numel()).map(|_| rng.gen_bool(p)).collect();
    flags[0] = true;
    ObservationMask::from_observed(shape.clone(), flags).unwrap()
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn max_abs_diff(a: &Matrix, b: &DMatrix<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), b.shape());
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    worst
}

pub fn oracle_svt(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let shrunk = svd.singular_values.map(|s| (s - tau).max(0.0));
    &u * DMatrix::from_diagonal(&shrunk) * vt
}

pub fn oracle_nuclear(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().sum()
}

/// Mode-`n` unfolding by explicit index arithmetic: row `i_n`, column the
/// row-major rank of the remaining indices.
pub fn oracle_unfold(t: &DenseTensor, mode: usize) -> DMatrix<f64> {
    let dims = t.shape().dims().to_vec();
    let rows = dims[mode];
    let cols = t.shape().numel() / rows;
    let mut out = DMatrix::zeros(rows, cols);
    let mut index = vec![0usize; dims.len()];
    for &value in t.data() {
        let mut col = 0;
        for (k, &ik) in index.iter().enumerate() {
            if k != mode {
                col = col * dims[k] + ik;
            }
        }
        out[(index[mode], col)] = value;
        for k in (0..dims.len()).rev() {
            index[k] += 1;
            if index[k] < dims[k] {
                break;
            }
            index[k] = 0;
        }
    }
    out
}

/// Inverse of [`oracle_unfold`], accumulated with `weight` into `acc`.
pub fn oracle_fold_into(acc: &mut [f64], m: &DMatrix<f64>, mode: usize, dims: &[usize], weight: f64) {
    let mut index = vec![0usize; dims.len()];
    for slot in acc.iter_mut() {
        let mut col = 0;
        for (k, &ik) in index.iter().enumerate() {
            if k != mode {
                col = col * dims[k] + ik;
            }
        }
        *slot += weight * m[(index[mode], col)];
        for k in (0..dims.len()).rev() {
            index[k] += 1;
            if index[k] < dims[k] {
                break;
            }
            index[k] = 0;
        }
    }
}

/// `Σ_n γ_n Fold_n(SVT_{γ_n λ}(Unfold_n(y)))` built from the oracles.
pub fn oracle_snn_prox(y: &DenseTensor, lambda: f64, weights: &[f64]) -> Vec<f64> {
    let dims = y.shape().dims().to_vec();
    let mut acc = vec![0.0; y.shape().numel()];
    for (n, &g) in weights.iter().enumerate() {
        if g > 0.0 {
            let m = oracle_svt(&oracle_unfold(y, n), g * lambda);
            oracle_fold_into(&mut acc, &m, n, &dims, g);
        }
    }
    acc
}

/// Unobserved entries set to the mean of the observed ones.
pub fn oracle_mean_fill(o: &DenseTensor, mask: &ObservationMask) -> Vec<f64> {
    let observed: Vec<f64> = (0..o.data().len())
        .filter(|&i| mask.is_observed(i))
        .map(|i| o.data()[i])
        .collect();
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    (0..o.data().len())
        .map(|i| if mask.is_observed(i) { o.data()[i] } else { mean })
        .collect()
}

pub fn rel_dist(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Observations `P_Ω(truth)`.
pub fn observe(truth: &DenseTensor, mask: &ObservationMask) -> DenseTensor {
    dtc_core::tensor::mask_project(truth, mask, true).unwrap()
}
