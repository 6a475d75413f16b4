use super::{
    check_iterations, check_mode_weights, check_problem, mean_fill, per_mode_svt, uniform_weights,
    Completion, Recorder, TraceOptions,
};
use crate::error::{Error, Result};
use crate::tensor::{fold, DenseTensor, ModeMatrix, ObservationMask};

#[derive(Debug, Clone, PartialEq)]
pub struct SilrtcConfig {
    pub mode_weights: Vec<f64>,
    /// Penalty β_i coupling `X_(i)` to its auxiliary matrix `M_i`.
    pub penalties: Vec<f64>,
    pub t_max: usize,
    pub eps: f64,
}

impl SilrtcConfig {
    /// Equal mode weights with penalties `β_i = 10 γ_i`.
    pub fn new(order: usize) -> Self {
        let mode_weights = uniform_weights(order);
        let penalties = mode_weights.iter().map(|g| 10.0 * g).collect();
        Self {
            mode_weights,
            penalties,
            t_max: 500,
            eps: 1e-5,
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        check_mode_weights(&self.mode_weights, order, 1e-12)?;
        if self.penalties.len() != order {
            return Err(Error::InvalidArgument(format!(
                "{} penalties for a tensor with {order} modes",
                self.penalties.len()
            )));
        }
        if self.penalties.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "penalties must be positive, got {:?}",
                self.penalties
            )));
        }
        check_iterations(self.t_max, self.eps)
    }
}

/// Simple low-rank tensor completion.
///
/// Alternates `M_i = SVT_{γ_i/β_i}(X_(i))` with the closed-form update
/// `X = Σ_i β_i Fold_i(M_i) / Σ_i β_i` on the unobserved entries. Modes with
/// `γ_i = 0` carry no nuclear-norm term; their optimal `M_i` is `X_(i)` itself,
/// so they are left out of both updates.
pub fn silrtc(
    o: &DenseTensor,
    mask: &ObservationMask,
    cfg: &SilrtcConfig,
    options: TraceOptions<'_>,
) -> Result<Completion> {
    check_problem(o, mask)?;
    cfg.validate(o.shape().order())?;

    let mut recorder = Recorder::new(o, mask, cfg.eps, options)?;
    let active: Vec<usize> = (0..o.shape().order())
        .filter(|&n| cfg.mode_weights[n] > 0.0)
        .collect();
    let penalty_sum: f64 = active.iter().map(|&n| cfg.penalties[n]).sum();
    let mut current = mean_fill(o, mask)?;

    for t in 1..=cfg.t_max {
        let parts = per_mode_svt(&current, |n| {
            (cfg.mode_weights[n] > 0.0).then(|| cfg.mode_weights[n] / cfg.penalties[n])
        })?;
        let mut folded = Vec::with_capacity(active.len());
        let mut nuclear = 0.0;
        for (n, part) in parts.into_iter().enumerate() {
            if let Some((m, nn)) = part {
                nuclear += cfg.mode_weights[n] * nn;
                folded.push((n, fold(&ModeMatrix::new(n, m), o.shape())?));
            }
        }

        let mut next = current.clone();
        for &i in mask.unobserved_indices() {
            let weighted: f64 = folded
                .iter()
                .map(|(n, f)| cfg.penalties[*n] * f.data()[i])
                .sum();
            next.data_mut()[i] = weighted / penalty_sum;
        }
        next.ensure_finite("averaging step", t)?;

        let coupling: f64 = folded
            .iter()
            .map(|(n, f)| 0.5 * cfg.penalties[*n] * f.dist_sq(&next))
            .sum();
        let done = recorder.record(t, &current, &next, Some(nuclear + coupling));
        current = next;
        if done {
            break;
        }
    }
    Ok(recorder.finish(current))
}
