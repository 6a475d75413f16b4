//! Dense N-mode tensors, mode unfoldings and observation masks.
//!
//! Elements are stored row-major (last index fastest). The mode-`n` unfolding
//! places mode `n` on the rows; columns enumerate the remaining modes in
//! increasing mode order, again row-major. Modes are 0-based throughout.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Mode sizes of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("mode {pos} has size 0")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape(format!("element count of {dims:?} overflows")))?;
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of elements.
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        } else {
            Ok(())
        }
    }

    /// Returns `(outer, size, inner)` where `outer` is the product of the
    /// sizes before `mode` and `inner` the product after it.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let outer = self.dims[..mode].iter().product();
        let inner = self.dims[mode + 1..].iter().product();
        (outer, self.dims[mode], inner)
    }

    /// Row-major linear rank of a multi-index.
    pub fn flat_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "index has {} components, shape has {} modes",
                index.len(),
                self.order()
            )));
        }
        let mut flat = 0;
        for (mode, (&i, &d)) in index.iter().zip(&self.dims).enumerate() {
            if i >= d {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of bounds for mode {mode} of size {d}"
                )));
            }
            flat = flat * d + i;
        }
        Ok(flat)
    }

    /// Inverse of [`Shape::flat_index`].
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.order()];
        for (slot, &d) in index.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        index
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Dense real tensor with a row-major element buffer.
///
/// Every element is finite; constructors reject NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::DimensionMismatch(format!(
                "buffer of length {} for shape {shape} ({} elements)",
                data.len(),
                shape.numel()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "tensor construction",
                iteration: None,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.numel()];
        Self { shape, data }
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        let data = vec![value; shape.numel()];
        Self::new(shape, data)
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let data = (0..shape.numel())
            .map(|flat| f(&shape.multi_index(flat)))
            .collect();
        Self::new(shape, data)
    }

    /// Wraps a buffer produced internally; finiteness is the caller's concern.
    pub(crate) fn from_parts_unchecked(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.flat_index(index)?])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, context: &'static str, iteration: usize) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context,
                iteration: Some(iteration),
            })
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Shape) -> Result<()> {
        if &self.shape != other {
            Err(Error::DimensionMismatch(format!(
                "shape {} does not match {other}",
                self.shape
            )))
        } else {
            Ok(())
        }
    }

    /// Squared Frobenius distance to a tensor of the same shape.
    pub(crate) fn dist_sq(&self, other: &DenseTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub(crate) fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Matrix view of a tensor along one mode.
#[derive(Debug, Clone)]
pub struct ModeMatrix {
    mode: usize,
    matrix: Matrix,
}

impl ModeMatrix {
    pub fn new(mode: usize, matrix: Matrix) -> Self {
        Self { mode, matrix }
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

/// Mode-`mode` unfolding of `t`.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<ModeMatrix> {
    t.shape.check_mode(mode)?;
    let (outer, size, inner) = t.shape.split(mode);
    let data = &t.data;
    let matrix = Matrix::from_fn(size, outer * inner, |row, col| {
        let (o, q) = (col / inner, col % inner);
        data[(o * size + row) * inner + q]
    });
    Ok(ModeMatrix { mode, matrix })
}

/// Inverse of [`unfold`]: scatters a mode matrix back into a tensor of `shape`.
pub fn fold(m: &ModeMatrix, shape: &Shape) -> Result<DenseTensor> {
    shape.check_mode(m.mode)?;
    let (outer, size, inner) = shape.split(m.mode);
    if m.rows() != size || m.cols() != outer * inner {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix cannot fold along mode {} into {shape}",
            m.rows(),
            m.cols(),
            m.mode
        )));
    }
    let mut data = vec![0.0; shape.numel()];
    accumulate_fold(&mut data, m.matrix(), m.mode, shape, 1.0);
    DenseTensor::new(shape.clone(), data)
}

/// `acc += weight * fold(matrix)` without materialising the folded tensor.
pub(crate) fn accumulate_fold(
    acc: &mut [f64],
    matrix: &Matrix,
    mode: usize,
    shape: &Shape,
    weight: f64,
) {
    let (outer, size, inner) = shape.split(mode);
    debug_assert_eq!(matrix.nrows(), size);
    debug_assert_eq!(matrix.ncols(), outer * inner);
    for col in 0..outer * inner {
        let (o, q) = (col / inner, col % inner);
        let column = matrix.col(col);
        for row in 0..size {
            acc[(o * size + row) * inner + q] += weight * column[row];
        }
    }
}

/// The observed index set and its complement, with fixed ascending orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    shape: Shape,
    observed: Vec<bool>,
    omega: Vec<usize>,
    omega_bar: Vec<usize>,
}

impl ObservationMask {
    pub fn from_observed(shape: Shape, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != shape.numel() {
            return Err(Error::DimensionMismatch(format!(
                "mask of length {} for shape {shape}",
                observed.len()
            )));
        }
        let (mut omega, mut omega_bar) = (Vec::new(), Vec::new());
        for (i, &seen) in observed.iter().enumerate() {
            if seen {
                omega.push(i);
            } else {
                omega_bar.push(i);
            }
        }
        Ok(Self {
            shape,
            observed,
            omega,
            omega_bar,
        })
    }

    /// Mask observing exactly the given linear indices (order and duplicates ignored).
    pub fn from_indices(shape: Shape, indices: &[usize]) -> Result<Self> {
        let mut observed = vec![false; shape.numel()];
        for &i in indices {
            let slot = observed.get_mut(i).ok_or_else(|| {
                Error::InvalidArgument(format!("linear index {i} out of range for {shape}"))
            })?;
            *slot = true;
        }
        Self::from_observed(shape, observed)
    }

    pub fn all(shape: Shape) -> Self {
        let n = shape.numel();
        Self::from_observed(shape, vec![true; n]).expect("length matches")
    }

    pub fn none(shape: Shape) -> Self {
        let n = shape.numel();
        Self::from_observed(shape, vec![false; n]).expect("length matches")
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn is_observed(&self, flat: usize) -> bool {
        self.observed[flat]
    }

    pub fn observed_flags(&self) -> &[bool] {
        &self.observed
    }

    /// Ω in ascending row-major order.
    pub fn observed_indices(&self) -> &[usize] {
        &self.omega
    }

    /// Ω̄ in ascending row-major order.
    pub fn unobserved_indices(&self) -> &[usize] {
        &self.omega_bar
    }

    pub fn observed_count(&self) -> usize {
        self.omega.len()
    }

    pub fn unobserved_count(&self) -> usize {
        self.omega_bar.len()
    }
}

/// `P_Ω(t)` when `keep_observed`, otherwise `P_Ω̄(t)`.
pub fn mask_project(
    t: &DenseTensor,
    mask: &ObservationMask,
    keep_observed: bool,
) -> Result<DenseTensor> {
    t.check_same_shape(&mask.shape)?;
    let data = t
        .data
        .iter()
        .zip(&mask.observed)
        .map(|(&v, &seen)| if seen == keep_observed { v } else { 0.0 })
        .collect();
    Ok(DenseTensor::from_parts_unchecked(t.shape.clone(), data))
}

/// Unobserved entries of `t`, listed in Ω̄ order.
pub fn vec_complement(t: &DenseTensor, mask: &ObservationMask) -> Result<Vec<f64>> {
    t.check_same_shape(&mask.shape)?;
    Ok(mask.omega_bar.iter().map(|&i| t.data[i]).collect())
}

/// Copy of `base` with its unobserved entries replaced by `v`.
pub fn scatter_complement(
    v: &[f64],
    mask: &ObservationMask,
    base: &DenseTensor,
) -> Result<DenseTensor> {
    base.check_same_shape(&mask.shape)?;
    if v.len() != mask.unobserved_count() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for {} unobserved entries",
            v.len(),
            mask.unobserved_count()
        )));
    }
    let mut out = base.clone();
    for (&i, &value) in mask.omega_bar.iter().zip(v) {
        out.data[i] = value;
    }
    DenseTensor::new(out.shape, out.data)
}

/// Overwrites the observed entries of `t` with those of `observations`.
pub(crate) fn clamp_observed(t: &mut DenseTensor, observations: &DenseTensor, mask: &ObservationMask) {
    for &i in &mask.omega {
        t.data[i] = observations.data[i];
    }
}
