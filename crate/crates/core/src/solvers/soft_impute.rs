use super::{
    check_iterations, data_fidelity, extrapolate, momentum_weight, Completion, Recorder,
    TraceOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::tensor::{unfold, DenseTensor, ObservationMask};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftImputeConfig {
    pub lambda: f64,
    /// Nesterov extrapolation with `θ_t = (t − 1)/(t + 2)`.
    pub accelerated: bool,
    pub t_max: usize,
    pub eps: f64,
}

impl SoftImputeConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            accelerated: true,
            t_max: 500,
            eps: 1e-5,
        }
    }
}

fn check_matrix(o: &DenseTensor, mask: &ObservationMask) -> Result<()> {
    if o.shape().order() != 2 {
        return Err(Error::InvalidArgument(format!(
            "soft-impute needs a matrix, got a {}-mode tensor",
            o.shape().order()
        )));
    }
    o.check_same_shape(mask.shape())
}

/// `SVT_λ(P_Ω(o) + P_Ω̄(y))` with the nuclear norm of the result.
fn step(y: &DenseTensor, o: &DenseTensor, mask: &ObservationMask, lambda: f64) -> Result<(DenseTensor, f64)> {
    let mut z = y.clone();
    for &i in mask.observed_indices() {
        z.data_mut()[i] = o.data()[i];
    }
    let (m, _, nuclear) = linalg::svt_with_rank(unfold(&z, 0)?.matrix(), lambda)?;
    Ok((from_matrix(&m, y), nuclear))
}

fn from_matrix(m: &Matrix, like: &DenseTensor) -> DenseTensor {
    let cols = m.ncols();
    let data = (0..m.nrows() * cols).map(|k| m[(k / cols, k % cols)]).collect();
    DenseTensor::from_parts_unchecked(like.shape().clone(), data)
}

/// A single plain recursion step `SVT_λ(X + P_Ω(O − X))`.
pub fn soft_impute_step(
    previous: &DenseTensor,
    o: &DenseTensor,
    mask: &ObservationMask,
    lambda: f64,
) -> Result<DenseTensor> {
    check_matrix(o, mask)?;
    previous.check_same_shape(o.shape())?;
    Ok(step(previous, o, mask, lambda)?.0)
}

/// Soft-Impute matrix completion from a zero start.
///
/// With `accelerated`, the point fed to the recursion is the extrapolation
/// `(1 + θ_t) X_{t−1} − θ_t X_{t−2}`.
pub fn soft_impute(
    o: &DenseTensor,
    mask: &ObservationMask,
    cfg: &SoftImputeConfig,
    options: TraceOptions<'_>,
) -> Result<Completion> {
    check_matrix(o, mask)?;
    check_iterations(cfg.t_max, cfg.eps)?;
    if !(cfg.lambda >= 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", cfg.lambda)));
    }

    let mut recorder = Recorder::new(o, mask, cfg.eps, options)?;
    let mut current = DenseTensor::zeros(o.shape().clone());
    let mut previous = current.clone();

    for t in 1..=cfg.t_max {
        let y = if cfg.accelerated {
            extrapolate(&current, &previous, momentum_weight(t)?)
        } else {
            current.clone()
        };
        let (next, nuclear) = step(&y, o, mask, cfg.lambda)?;
        next.ensure_finite("thresholding step", t)?;
        let objective = data_fidelity(&next, o, mask) + cfg.lambda * nuclear;
        let done = recorder.record(t, &current, &next, Some(objective));
        previous = std::mem::replace(&mut current, next);
        if done {
            break;
        }
    }
    Ok(recorder.finish(current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn fully_observed_without_shrinkage_is_a_fixed_point() {
        let shape = Shape::new(vec![3, 4]).unwrap();
        let o = DenseTensor::from_fn(shape.clone(), |ix| (ix[0] as f64 - ix[1] as f64) * 0.5).unwrap();
        let mask = ObservationMask::all(shape);
        let mut cfg = SoftImputeConfig::new(0.0);
        cfg.accelerated = false;
        let out = soft_impute(&o, &mask, &cfg, TraceOptions::default()).unwrap();
        let first = soft_impute_step(&DenseTensor::zeros(o.shape().clone()), &o, &mask, 0.0).unwrap();
        assert_eq!(first, o);
        assert_eq!(out.estimate, o);
        assert!(out.trace.iterations() <= 2);
    }

    #[test]
    fn zero_observations_give_zero() {
        let shape = Shape::new(vec![4, 4]).unwrap();
        let o = DenseTensor::zeros(shape.clone());
        let mask = ObservationMask::from_indices(shape, &[0, 5, 10]).unwrap();
        for accelerated in [false, true] {
            let cfg = SoftImputeConfig {
                lambda: 0.7,
                accelerated,
                t_max: 10,
                eps: 1e-9,
            };
            let out = soft_impute(&o, &mask, &cfg, TraceOptions::default()).unwrap();
            assert_eq!(out.estimate, o);
        }
    }

    #[test]
    fn rejects_tensors() {
        let shape = Shape::new(vec![2, 2, 2]).unwrap();
        let o = DenseTensor::zeros(shape.clone());
        let mask = ObservationMask::all(shape);
        assert!(soft_impute(&o, &mask, &SoftImputeConfig::new(1.0), TraceOptions::default()).is_err());
    }
}
