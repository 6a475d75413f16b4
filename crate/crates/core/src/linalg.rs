//! Dense matrix kernels: SVD, singular value thresholding, pseudo-inverse
//! least squares and Frobenius norms.
//!
//! Factorizations are delegated to `faer` and always run sequentially so
//! results do not depend on the thread pool.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::{Accum, Par};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub type Matrix = faer::Mat<f64>;

/// Relative cutoff for treating singular values as zero in pseudo-inverses.
const PINV_RTOL: f64 = 1e-12;

/// Thin SVD `m = U diag(sigma) Vᵀ` with `r = min(rows, cols)` components.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        scaled_product(&self.u, &self.sigma, &self.v, self.sigma.len())
    }
}

/// `U[:, :k] diag(s[:k]) V[:, :k]ᵀ`.
fn scaled_product(u: &Matrix, s: &[f64], v: &Matrix, k: usize) -> Matrix {
    let mut us = u.subcols(0, k).to_owned();
    for (j, &sj) in s[..k].iter().enumerate() {
        us.col_mut(j).iter_mut().for_each(|x| *x *= sj);
    }
    let mut out = Matrix::zeros(u.nrows(), v.nrows());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        Accum::Replace,
        us.as_ref(),
        v.subcols(0, k).transpose(),
        1.0,
        Par::Seq,
    );
    out
}

fn ensure_finite(m: &Matrix, context: &'static str) -> Result<()> {
    let finite = (0..m.ncols()).all(|j| m.col(j).iter().all(|x| x.is_finite()));
    if finite {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context,
            iteration: None,
        })
    }
}

/// Thin singular value decomposition.
///
/// Each column of `U` is signed so that its largest-magnitude entry is
/// nonnegative, with the matching column of `V` flipped alongside.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    ensure_finite(m, "svd input")?;
    let (rows, cols) = (m.nrows(), m.ncols());
    let k = rows.min(cols);
    let mut s = faer::diag::Diag::<f64>::zeros(k);
    let mut u = Matrix::zeros(rows, k);
    let mut v = Matrix::zeros(cols, k);
    let scratch = svd::svd_scratch::<f64>(
        rows,
        cols,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        Par::Seq,
        Default::default(),
    );
    let mut buf = MemBuffer::new(scratch);
    svd::svd(
        m.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::SvdNoConvergence { rows, cols })?;

    let mut sigma: Vec<f64> = s.column_vector().iter().copied().collect();
    if sigma.windows(2).any(|w| w[0] < w[1]) {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
        u = Matrix::from_fn(rows, k, |i, j| u[(i, order[j])]);
        v = Matrix::from_fn(cols, k, |i, j| v[(i, order[j])]);
        sigma = order.iter().map(|&j| sigma[j]).collect();
    }
    for (j, sj) in sigma.iter_mut().enumerate() {
        *sj = sj.max(0.0);
        let pivot = u
            .col(j)
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    let factors = SvdFactors { u, sigma, v };
    ensure_finite(&factors.u, "svd output")?;
    ensure_finite(&factors.v, "svd output")?;
    Ok(factors)
}

/// Singular value thresholding: `U max(Σ − tau, 0) Vᵀ`.
pub fn svt(m: &Matrix, tau: f64) -> Result<Matrix> {
    Ok(svt_with_rank(m, tau)?.0)
}

/// [`svt`] that also reports the rank of the result and the nuclear norm of
/// the shrunk spectrum.
pub fn svt_with_rank(m: &Matrix, tau: f64) -> Result<(Matrix, usize, f64)> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be finite and nonnegative, got {tau}"
        )));
    }
    let f = svd(m)?;
    let shrunk: Vec<f64> = f.sigma.iter().map(|s| (s - tau).max(0.0)).collect();
    let rank = shrunk.iter().take_while(|&&s| s > 0.0).count();
    let nuclear = shrunk.iter().sum();
    if tau == 0.0 {
        return Ok((m.clone(), rank, nuclear));
    }
    Ok((scaled_product(&f.u, &shrunk, &f.v, rank), rank, nuclear))
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.sigma.iter().sum())
}

/// Moore–Penrose pseudo-inverse; singular values below
/// `max(rows, cols) · σ_max · 1e-12` are treated as zero.
pub fn pinv(m: &Matrix) -> Result<Matrix> {
    let f = svd(m)?;
    let smax = f.sigma.first().copied().unwrap_or(0.0);
    let cutoff = m.nrows().max(m.ncols()) as f64 * smax * PINV_RTOL;
    let inv: Vec<f64> = f
        .sigma
        .iter()
        .map(|&s| if s > cutoff { 1.0 / s } else { 0.0 })
        .collect();
    let rank = inv.iter().take_while(|&&s| s > 0.0).count();
    Ok(scaled_product(&f.v, &inv, &f.u, rank))
}

/// Which side of the unknown the coefficient matrix sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve `Z · a ≈ b`, i.e. `Z = b aᵀ (a aᵀ)†`.
    Right,
    /// Solve `a · Z ≈ b`, i.e. `Z = (aᵀ a)† aᵀ b`.
    Left,
}

/// Minimum-norm least-squares solution in pseudo-inverse form.
pub fn least_squares_xy(a: &Matrix, b: &Matrix, side: Side) -> Result<Matrix> {
    match side {
        Side::Right => {
            if a.ncols() != b.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "Z·a = b with a {}x{} and b {}x{}",
                    a.nrows(),
                    a.ncols(),
                    b.nrows(),
                    b.ncols()
                )));
            }
            let gram = mul_nt(a, a);
            Ok(mul(&mul_nt(b, a), &pinv(&gram)?))
        }
        Side::Left => {
            if a.nrows() != b.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "a·Z = b with a {}x{} and b {}x{}",
                    a.nrows(),
                    a.ncols(),
                    b.nrows(),
                    b.ncols()
                )));
            }
            let gram = mul_tn(a, a);
            Ok(mul(&pinv(&gram)?, &mul_tn(a, b)))
        }
    }
}

/// `a · b`
pub fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), b.ncols());
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Replace, a.as_ref(), b.as_ref(), 1.0, Par::Seq);
    out
}

/// `a · bᵀ`
pub fn mul_nt(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), b.nrows());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        Accum::Replace,
        a.as_ref(),
        b.as_ref().transpose(),
        1.0,
        Par::Seq,
    );
    out
}

/// `aᵀ · b`
pub fn mul_tn(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.ncols(), b.ncols());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        Accum::Replace,
        a.as_ref().transpose(),
        b.as_ref(),
        1.0,
        Par::Seq,
    );
    out
}

/// Types with an entrywise Frobenius norm.
pub trait Frobenius {
    fn frob_norm_sq(&self) -> f64;

    fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }
}

impl Frobenius for Matrix {
    fn frob_norm_sq(&self) -> f64 {
        (0..self.ncols())
            .map(|j| self.col(j).iter().map(|x| x * x).sum::<f64>())
            .sum()
    }
}

impl Frobenius for DenseTensor {
    fn frob_norm_sq(&self) -> f64 {
        self.norm_sq()
    }
}

pub fn frob_norm<T: Frobenius + ?Sized>(t: &T) -> f64 {
    t.frob_norm()
}

/// `‖a − b‖_F` for equally sized matrices.
pub fn frob_dist(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).frob_norm()
}
