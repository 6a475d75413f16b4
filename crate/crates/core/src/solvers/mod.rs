//! Iterative completion algorithms.
//!
//! * [`dalrtc`]: discrete-aware proximal gradient with Nesterov extrapolation.
//! * [`silrtc`]: alternating per-mode SVT and closed-form averaging.
//! * [`tmac`]: parallel per-mode matrix factorization.
//! * [`soft_impute`]: the matrix recursion, optionally accelerated.
//!
//! Every solver returns its estimate with the observed entries copied from
//! the observations, together with a per-iteration [`ConvergenceTrace`].

mod dalrtc;
mod silrtc;
mod soft_impute;
mod tmac;

use std::time::Instant;

use rayon::prelude::*;

pub use dalrtc::{dalrtc, SolverConfig};
pub use silrtc::{silrtc, SilrtcConfig};
pub use soft_impute::{soft_impute, soft_impute_step, SoftImputeConfig};
pub use tmac::{tmac, tmac_update_products, TmacConfig, TmacFactors, TmacInit, XUpdate};

use crate::discrete::Alphabet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{accumulate_fold, clamp_observed, unfold, DenseTensor, ObservationMask};

/// Tolerance on `Σ γ_n = 1` accepted by [`snn_prox`].
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖X_{t+1} − X_t‖_F / ‖X_t‖_F` (denominator 1 when `X_t = 0`).
    pub rel_change: f64,
    pub objective: Option<f64>,
    pub nmse: Option<f64>,
    pub elapsed_ms: f64,
}

/// Per-iteration diagnostics of a solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    /// Objective of the starting point, where the solver tracks one cheaply.
    pub initial_objective: Option<f64>,
    /// `true` when the relative-change tolerance stopped the loop.
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn nmse(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.nmse).collect()
    }

    /// Records with the wall-clock column zeroed, for determinism checks.
    pub fn without_timing(&self) -> Vec<IterationRecord> {
        self.records
            .iter()
            .cloned()
            .map(|mut r| {
                r.elapsed_ms = 0.0;
                r
            })
            .collect()
    }
}

/// Optional extras recorded alongside each iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct TraceOptions<'a> {
    /// Ground truth; enables the NMSE column.
    pub truth: Option<&'a DenseTensor>,
    /// Track the full objective for solvers where it costs extra SVDs.
    pub objective: bool,
}

/// Output of a solve.
#[derive(Debug, Clone)]
pub struct Completion {
    pub estimate: DenseTensor,
    pub trace: ConvergenceTrace,
}

/// Shared iteration bookkeeping: timing, stopping rule, NMSE column.
struct Recorder<'a> {
    start: Instant,
    trace: ConvergenceTrace,
    options: TraceOptions<'a>,
    observations: &'a DenseTensor,
    mask: &'a ObservationMask,
    eps: f64,
}

impl<'a> Recorder<'a> {
    fn new(
        observations: &'a DenseTensor,
        mask: &'a ObservationMask,
        eps: f64,
        options: TraceOptions<'a>,
    ) -> Result<Self> {
        if let Some(truth) = options.truth {
            truth.check_same_shape(observations.shape())?;
        }
        Ok(Self {
            start: Instant::now(),
            trace: ConvergenceTrace::default(),
            options,
            observations,
            mask,
            eps,
        })
    }

    /// Appends a record for the step `current → next`; returns `true` when
    /// the stopping rule fires.
    fn record(
        &mut self,
        iteration: usize,
        current: &DenseTensor,
        next: &DenseTensor,
        objective: Option<f64>,
    ) -> bool {
        let rel_change = relative_change(current, next);
        let nmse = self.options.truth.map(|truth| {
            let mut clamped = next.clone();
            clamp_observed(&mut clamped, self.observations, self.mask);
            clamped.dist_sq(truth) / truth.norm_sq()
        });
        self.trace.records.push(IterationRecord {
            iteration,
            rel_change,
            objective,
            nmse,
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        let done = rel_change < self.eps;
        self.trace.converged = done;
        done
    }

    fn finish(self, mut estimate: DenseTensor) -> Completion {
        clamp_observed(&mut estimate, self.observations, self.mask);
        Completion {
            estimate,
            trace: self.trace,
        }
    }
}

fn relative_change(current: &DenseTensor, next: &DenseTensor) -> f64 {
    let denom = current.norm_sq().sqrt();
    let diff = next.dist_sq(current).sqrt();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

fn check_problem(o: &DenseTensor, mask: &ObservationMask) -> Result<()> {
    o.check_same_shape(mask.shape())?;
    if mask.observed_count() == 0 {
        return Err(Error::EmptyObservations);
    }
    Ok(())
}

pub(crate) fn check_mode_weights(weights: &[f64], order: usize, tol: f64) -> Result<()> {
    if weights.len() != order {
        return Err(Error::InvalidArgument(format!(
            "{} mode weights for a tensor with {order} modes",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mode weights must be nonnegative, got {weights:?}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "mode weights must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

pub(crate) fn check_iterations(t_max: usize, eps: f64) -> Result<()> {
    if t_max == 0 {
        return Err(Error::InvalidArgument("t_max must be at least 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {eps}"
        )));
    }
    Ok(())
}

/// Equal weights `1/N` for each of `order` modes.
pub fn uniform_weights(order: usize) -> Vec<f64> {
    vec![1.0 / order as f64; order]
}

/// Observed entries kept; unobserved entries set to the mean of the observed ones.
pub fn mean_fill(o: &DenseTensor, mask: &ObservationMask) -> Result<DenseTensor> {
    check_problem(o, mask)?;
    let observed = mask.observed_indices();
    let mean = observed.iter().map(|&i| o.data()[i]).sum::<f64>() / observed.len() as f64;
    let mut out = o.clone();
    for &i in mask.unobserved_indices() {
        out.data_mut()[i] = mean;
    }
    Ok(out)
}

/// Momentum weight `(t − 1) / (t + 2)` for iteration `t ≥ 1`.
pub fn momentum_weight(t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::InvalidArgument("momentum is defined for t >= 1".into()));
    }
    Ok((t as f64 - 1.0) / (t as f64 + 2.0))
}

/// `(1 + θ) current − θ previous`.
pub(crate) fn extrapolate(current: &DenseTensor, previous: &DenseTensor, theta: f64) -> DenseTensor {
    let data = current
        .data()
        .iter()
        .zip(previous.data())
        .map(|(&c, &p)| (1.0 + theta) * c - theta * p)
        .collect();
    DenseTensor::from_parts_unchecked(current.shape().clone(), data)
}

/// Weighted sum-of-nuclear-norms proximal step:
/// `Σ_n γ_n Fold_n(SVT_{γ_n λ}(Unfold_n(y)))`.
///
/// Modes with zero weight contribute nothing and are skipped. The per-mode
/// thresholdings run in parallel and are summed in mode order.
pub fn snn_prox(y: &DenseTensor, lambda: f64, mode_weights: &[f64]) -> Result<DenseTensor> {
    check_mode_weights(mode_weights, y.shape().order(), WEIGHT_SUM_TOL)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "low-rank weight must be nonnegative, got {lambda}"
        )));
    }
    let parts = per_mode_svt(y, |n| (mode_weights[n] > 0.0).then(|| mode_weights[n] * lambda))?;
    let mut acc = vec![0.0; y.shape().numel()];
    for (n, part) in parts.iter().enumerate() {
        if let Some((m, _)) = part {
            accumulate_fold(&mut acc, m, n, y.shape(), mode_weights[n]);
        }
    }
    Ok(DenseTensor::from_parts_unchecked(y.shape().clone(), acc))
}

/// Thresholds each mode unfolding of `x` by `threshold(n)` (skipping modes
/// that return `None`); yields the thresholded matrices and their nuclear norms.
fn per_mode_svt(
    x: &DenseTensor,
    threshold: impl Fn(usize) -> Option<f64> + Sync,
) -> Result<Vec<Option<(linalg::Matrix, f64)>>> {
    (0..x.shape().order())
        .into_par_iter()
        .map(|n| match threshold(n) {
            None => Ok(None),
            Some(tau) => {
                let unfolded = unfold(x, n)?;
                let (m, _, nuclear) = linalg::svt_with_rank(unfolded.matrix(), tau)?;
                Ok(Some((m, nuclear)))
            }
        })
        .collect()
}

/// `Σ_n γ_n ‖X_(n)‖_*`.
pub(crate) fn weighted_nuclear_norm(x: &DenseTensor, weights: &[f64]) -> Result<f64> {
    let norms: Vec<f64> = (0..x.shape().order())
        .into_par_iter()
        .map(|n| {
            if weights[n] > 0.0 {
                Ok(weights[n] * linalg::nuclear_norm(unfold(x, n)?.matrix())?)
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<_>>()?;
    Ok(norms.iter().sum())
}

/// `½‖P_Ω(x − o)‖²_F`.
pub(crate) fn data_fidelity(x: &DenseTensor, o: &DenseTensor, mask: &ObservationMask) -> f64 {
    0.5 * mask
        .observed_indices()
        .iter()
        .map(|&i| {
            let d = x.data()[i] - o.data()[i];
            d * d
        })
        .sum::<f64>()
}

/// Rounds the unobserved entries to the nearest symbol.
pub(crate) fn round_unobserved(x: &mut DenseTensor, mask: &ObservationMask, alphabet: &Alphabet) {
    for &i in mask.unobserved_indices() {
        let v = x.data()[i];
        x.data_mut()[i] = alphabet.nearest(v);
    }
}
