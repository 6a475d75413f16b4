use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;

use super::{
    check_iterations, check_mode_weights, check_problem, mean_fill, uniform_weights, Completion,
    Recorder, TraceOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{self, least_squares_xy, Frobenius, Matrix, Side};
use crate::tensor::{accumulate_fold, unfold, DenseTensor, ObservationMask, Shape};

/// Starting point for the factor matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TmacInit {
    /// `X_i = U_r Σ_r` of the mean-filled unfolding, `Y_i` by least squares.
    #[default]
    TruncatedSvd,
    /// Independent standard normal entries.
    Random { seed: u64 },
}

/// Form of the `X_i` block update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XUpdate {
    /// `X_i = X_(i) Y_iᵀ`.
    #[default]
    Simplified,
    /// `X_i = X_(i) Y_iᵀ (Y_i Y_iᵀ)†`.
    PseudoInverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmacConfig {
    pub ranks: Vec<usize>,
    pub mode_weights: Vec<f64>,
    pub t_max: usize,
    pub eps: f64,
    pub init: TmacInit,
    pub x_update: XUpdate,
}

impl TmacConfig {
    pub fn new(ranks: Vec<usize>) -> Self {
        let order = ranks.len();
        Self {
            ranks,
            mode_weights: uniform_weights(order),
            t_max: 500,
            eps: 1e-5,
            init: TmacInit::default(),
            x_update: XUpdate::default(),
        }
    }

    pub fn validate(&self, shape: &Shape) -> Result<()> {
        let order = shape.order();
        check_mode_weights(&self.mode_weights, order, 1e-12)?;
        if self.ranks.len() != order {
            return Err(Error::InvalidArgument(format!(
                "{} ranks for a tensor with {order} modes",
                self.ranks.len()
            )));
        }
        for (n, &r) in self.ranks.iter().enumerate() {
            let rows = shape.dim(n);
            let cols = shape.numel() / rows;
            if r < 1 || r > rows.min(cols) {
                return Err(Error::InvalidArgument(format!(
                    "rank {r} for mode {n} outside 1..={}",
                    rows.min(cols)
                )));
            }
        }
        check_iterations(self.t_max, self.eps)
    }
}

/// Per-mode factors `X_i` (`I_i × r_i`) and `Y_i` (`r_i × ∏_{j≠i} I_j`).
#[derive(Debug, Clone)]
pub struct TmacFactors {
    pub x: Vec<Matrix>,
    pub y: Vec<Matrix>,
}

impl TmacFactors {
    fn initial(current: &DenseTensor, cfg: &TmacConfig) -> Result<Self> {
        let order = current.shape().order();
        let pairs: Vec<(Matrix, Matrix)> = match cfg.init {
            TmacInit::TruncatedSvd => (0..order)
                .into_par_iter()
                .map(|n| {
                    let unfolded = unfold(current, n)?.into_matrix();
                    let f = linalg::svd(&unfolded)?;
                    let r = cfg.ranks[n];
                    let x = Matrix::from_fn(unfolded.nrows(), r, |i, j| f.u[(i, j)] * f.sigma[j]);
                    let y = least_squares_xy(&x, &unfolded, Side::Left)?;
                    Ok((x, y))
                })
                .collect::<Result<_>>()?,
            TmacInit::Random { seed } => {
                let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
                let shape = current.shape();
                (0..order)
                    .map(|n| {
                        let (rows, r) = (shape.dim(n), cfg.ranks[n]);
                        let cols = shape.numel() / rows;
                        let x = Matrix::from_fn(rows, r, |_, _| StandardNormal.sample(&mut rng));
                        let y = Matrix::from_fn(r, cols, |_, _| StandardNormal.sample(&mut rng));
                        (x, y)
                    })
                    .collect()
            }
        };
        let (x, y) = pairs.into_iter().unzip();
        Ok(Self { x, y })
    }
}

/// One block update of every mode's factors against the current tensor.
///
/// Returns the new factors and the products `X_i Y_i`.
pub fn tmac_update_products(
    current: &DenseTensor,
    factors: &TmacFactors,
    x_update: XUpdate,
) -> Result<(TmacFactors, Vec<Matrix>)> {
    let order = current.shape().order();
    if factors.x.len() != order || factors.y.len() != order {
        return Err(Error::DimensionMismatch(format!(
            "factors for {} modes, tensor has {order}",
            factors.x.len()
        )));
    }
    let updated: Vec<(Matrix, Matrix, Matrix)> = (0..order)
        .into_par_iter()
        .map(|n| {
            let unfolded = unfold(current, n)?.into_matrix();
            let y_old = &factors.y[n];
            if y_old.ncols() != unfolded.ncols() || factors.x[n].nrows() != unfolded.nrows() {
                return Err(Error::DimensionMismatch(format!("factor shapes for mode {n}")));
            }
            let x = match x_update {
                XUpdate::Simplified => linalg::mul_nt(&unfolded, y_old),
                XUpdate::PseudoInverse => least_squares_xy(y_old, &unfolded, Side::Right)?,
            };
            let y = least_squares_xy(&x, &unfolded, Side::Left)?;
            let product = linalg::mul(&x, &y);
            Ok((x, y, product))
        })
        .collect::<Result<_>>()?;
    let mut xs = Vec::with_capacity(order);
    let mut ys = Vec::with_capacity(order);
    let mut products = Vec::with_capacity(order);
    for (x, y, p) in updated {
        xs.push(x);
        ys.push(y);
        products.push(p);
    }
    Ok((TmacFactors { x: xs, y: ys }, products))
}

/// `Σ_i γ_i/2 ‖X_i Y_i − X_(i)‖²_F`.
fn fit_residual(x: &DenseTensor, products: &[Matrix], weights: &[f64]) -> Result<f64> {
    products
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let unfolded = unfold(x, n)?.into_matrix();
            Ok(0.5 * weights[n] * (p - &unfolded).frob_norm_sq())
        })
        .sum()
}

/// Tensor completion by parallel low-rank matrix factorization of every
/// mode unfolding.
///
/// Each iteration refreshes `X_i`, then `Y_i = (X_iᵀX_i)† X_iᵀ X_(i)`, then
/// sets the unobserved entries to `Σ_i γ_i Fold_i(X_i Y_i)`.
pub fn tmac(
    o: &DenseTensor,
    mask: &ObservationMask,
    cfg: &TmacConfig,
    options: TraceOptions<'_>,
) -> Result<Completion> {
    check_problem(o, mask)?;
    cfg.validate(o.shape())?;

    let mut recorder = Recorder::new(o, mask, cfg.eps, options)?;
    let mut current = mean_fill(o, mask)?;
    let mut factors = TmacFactors::initial(&current, cfg)?;
    let initial_products: Vec<Matrix> = factors
        .x
        .iter()
        .zip(&factors.y)
        .map(|(x, y)| linalg::mul(x, y))
        .collect();
    recorder.trace.initial_objective = Some(fit_residual(&current, &initial_products, &cfg.mode_weights)?);

    for t in 1..=cfg.t_max {
        let (updated, products) = tmac_update_products(&current, &factors, cfg.x_update)?;
        factors = updated;

        let mut acc = vec![0.0; o.shape().numel()];
        for (n, p) in products.iter().enumerate() {
            accumulate_fold(&mut acc, p, n, o.shape(), cfg.mode_weights[n]);
        }
        let mut next = current.clone();
        for &i in mask.unobserved_indices() {
            next.data_mut()[i] = acc[i];
        }
        next.ensure_finite("factor update", t)?;

        let objective = fit_residual(&next, &products, &cfg.mode_weights)?;
        let done = recorder.record(t, &current, &next, Some(objective));
        current = next;
        if done {
            break;
        }
    }
    Ok(recorder.finish(current))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_bounds_are_checked() {
        let shape = Shape::new(vec![4, 3, 2]).unwrap();
        assert!(TmacConfig::new(vec![1, 1, 1]).validate(&shape).is_ok());
        assert!(TmacConfig::new(vec![4, 3, 2]).validate(&shape).is_ok());
        assert!(TmacConfig::new(vec![5, 1, 1]).validate(&shape).is_err());
        assert!(TmacConfig::new(vec![0, 1, 1]).validate(&shape).is_err());
        assert!(TmacConfig::new(vec![1, 1]).validate(&shape).is_err());
    }

    #[test]
    fn observed_entries_are_clamped() {
        let shape = Shape::new(vec![5, 4, 3]).unwrap();
        let o = DenseTensor::from_fn(shape.clone(), |ix| (ix[0] + ix[1] * ix[2]) as f64).unwrap();
        let observed: Vec<usize> = (0..shape.numel()).filter(|i| i % 2 == 0).collect();
        let mask = ObservationMask::from_indices(shape, &observed).unwrap();
        let mut cfg = TmacConfig::new(vec![2, 2, 2]);
        cfg.t_max = 20;
        let out = tmac(&o, &mask, &cfg, TraceOptions::default()).unwrap();
        for &i in mask.observed_indices() {
            assert_eq!(out.estimate.data()[i].to_bits(), o.data()[i].to_bits());
        }
        assert!(out.trace.initial_objective.is_some());
    }
}
