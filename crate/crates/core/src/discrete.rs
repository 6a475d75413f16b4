//! Discreteness prior: a smoothed ℓ0 count of distances to alphabet symbols,
//! convexized with the quadratic transform.
//!
//! For an unobserved entry `x_j` and symbol `a_k` the auxiliary weight is
//! `β_kj = √α / (|x_j − a_k|² + α)`. Collecting `B = Σ_k diag(β_k²)` and
//! `b = Σ_k a_k β_k²` gives the quadratic surrogate `h(x) = xᵀBx − 2xᵀb`,
//! whose gradient `2(B ⊙ x − b)` drives the gradient step of the solver.

use crate::error::{Error, Result};

/// Finite, strictly increasing set of admissible entry values.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    values: Vec<f64>,
}

impl Alphabet {
    /// Builds an alphabet from arbitrary values; they are sorted and must be distinct.
    pub fn new(values: impl Into<Vec<f64>>) -> Result<Self> {
        let mut values = values.into();
        if values.is_empty() {
            return Err(Error::InvalidArgument("alphabet must not be empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("alphabet values must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("alphabet values must be distinct".into()));
        }
        Ok(Self { values })
    }

    /// `{0, 1, …, levels − 1}`.
    pub fn integer_levels(levels: usize) -> Result<Self> {
        Self::new((0..levels).map(|v| v as f64).collect::<Vec<_>>())
    }

    /// 8-bit intensity levels `{0, …, 255}`.
    pub fn rgb8() -> Self {
        Self::integer_levels(256).expect("256 distinct levels")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Closest symbol to `x`; ties go to the smaller symbol.
    pub fn nearest(&self, x: f64) -> f64 {
        let v = &self.values;
        let pos = v.partition_point(|&a| a < x);
        if pos == 0 {
            return v[0];
        }
        if pos == v.len() {
            return v[v.len() - 1];
        }
        let (lo, hi) = (v[pos - 1], v[pos]);
        if hi - x < x - lo {
            hi
        } else {
            lo
        }
    }
}

/// Quadratic-transform state for the unobserved entries of the current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct FpAuxiliaries {
    /// `β_kj`, stored symbol-major: `beta[k * n + j]` with `n = |Ω̄|`. Empty
    /// when only the moments were computed.
    pub beta: Vec<f64>,
    pub b: Vec<f64>,
    /// Diagonal of `B`.
    pub b_diag: Vec<f64>,
    pub alpha: f64,
    symbols: usize,
}

impl FpAuxiliaries {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn beta_at(&self, k: usize, j: usize) -> f64 {
        self.beta[k * self.len() + j]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "smoothing constant must be positive, got {alpha}"
        )))
    }
}

/// Smoothed ℓ0 count `Σ v_i² / (v_i² + α)`.
pub fn l0_approx(v: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(v.iter().map(|x| x * x / (x * x + alpha)).sum())
}

/// Recomputes `β`, `b` and `diag(B)` at the unobserved values `x_unobs`.
pub fn update_auxiliaries(
    x_unobs: &[f64],
    alphabet: &Alphabet,
    alpha: f64,
) -> Result<FpAuxiliaries> {
    check_alpha(alpha)?;
    if x_unobs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "auxiliary update",
            iteration: None,
        });
    }
    let n = x_unobs.len();
    let sqrt_alpha = alpha.sqrt();
    let mut beta = Vec::with_capacity(alphabet.len() * n);
    for &a in alphabet.values() {
        beta.extend(x_unobs.iter().map(|&x| {
            let d = x - a;
            sqrt_alpha / (d * d + alpha)
        }));
    }
    let (b, b_diag) = moments(x_unobs, alphabet, alpha);
    Ok(FpAuxiliaries {
        beta,
        b,
        b_diag,
        alpha,
        symbols: alphabet.len(),
    })
}

/// `b` and `diag(B)` without materializing `β`. Used by the solver, where
/// `|𝒜| · |Ω̄|` values per iteration would dominate the cost.
pub(crate) fn update_moments(
    x_unobs: &[f64],
    alphabet: &Alphabet,
    alpha: f64,
) -> Result<FpAuxiliaries> {
    check_alpha(alpha)?;
    if x_unobs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "auxiliary update",
            iteration: None,
        });
    }
    let (b, b_diag) = moments(x_unobs, alphabet, alpha);
    Ok(FpAuxiliaries {
        beta: Vec::new(),
        b,
        b_diag,
        alpha,
        symbols: alphabet.len(),
    })
}

fn moments(x_unobs: &[f64], alphabet: &Alphabet, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let sqrt_alpha = alpha.sqrt();
    x_unobs
        .iter()
        .map(|&x| {
            let (mut b, mut diag) = (0.0, 0.0);
            for &a in alphabet.values() {
                let d = x - a;
                let bkj = sqrt_alpha / (d * d + alpha);
                let sq = bkj * bkj;
                diag += sq;
                b += a * sq;
            }
            (b, diag)
        })
        .unzip()
}

fn check_len(x: &[f64], aux: &FpAuxiliaries) -> Result<()> {
    if x.len() == aux.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "vector of length {} against auxiliaries for {} entries",
            x.len(),
            aux.len()
        )))
    }
}

/// Surrogate value `xᵀBx − 2xᵀb`.
pub fn h_value(x_unobs: &[f64], aux: &FpAuxiliaries) -> Result<f64> {
    check_len(x_unobs, aux)?;
    Ok(x_unobs
        .iter()
        .zip(aux.b_diag.iter().zip(&aux.b))
        .map(|(&x, (&bd, &b))| bd * x * x - 2.0 * b * x)
        .sum())
}

/// Surrogate gradient `2(B ⊙ x − b)`.
pub fn grad_h(x_unobs: &[f64], aux: &FpAuxiliaries) -> Result<Vec<f64>> {
    check_len(x_unobs, aux)?;
    Ok(x_unobs
        .iter()
        .zip(aux.b_diag.iter().zip(&aux.b))
        .map(|(&x, (&bd, &b))| 2.0 * (bd * x - b))
        .collect())
}

/// Step size `1 / max diag(B)`.
pub fn lipschitz_step(aux: &FpAuxiliaries) -> Result<f64> {
    if aux.b_diag.is_empty() {
        return Err(Error::InvalidArgument(
            "step size needs at least one unobserved entry".into(),
        ));
    }
    let mut max = 0.0f64;
    for &d in &aux.b_diag {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "diagonal of B must be positive and finite, found {d}"
            )));
        }
        max = max.max(d);
    }
    Ok(1.0 / max)
}
