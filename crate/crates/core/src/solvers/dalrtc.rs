use super::{
    check_iterations, check_mode_weights, check_problem, data_fidelity, extrapolate, mean_fill,
    momentum_weight, round_unobserved, snn_prox, uniform_weights, weighted_nuclear_norm,
    Completion, Recorder, TraceOptions,
};
use crate::discrete::{self, Alphabet, FpAuxiliaries};
use crate::error::{Error, Result};
use crate::tensor::{vec_complement, DenseTensor, ObservationMask};

/// Hyperparameters of the discrete-aware solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Low-rank weight λ.
    pub lambda: f64,
    /// Discreteness weight ζ.
    pub zeta: f64,
    /// ℓ0 smoothing constant α.
    pub alpha: f64,
    /// Per-mode weights γ, nonnegative and summing to one.
    pub mode_weights: Vec<f64>,
    pub t_max: usize,
    /// Relative-change tolerance.
    pub eps: f64,
    pub seed: u64,
    /// Snap unobserved entries of the returned estimate to the alphabet.
    pub round_output: bool,
}

impl SolverConfig {
    /// Defaults for an `order`-mode tensor: α = 0.01, λ = 65, ζ = 0.5,
    /// ε = 1e-5, 500 iterations, equal mode weights.
    pub fn new(order: usize) -> Self {
        Self {
            lambda: 65.0,
            zeta: 0.5,
            alpha: 0.01,
            mode_weights: uniform_weights(order),
            t_max: 500,
            eps: 1e-5,
            seed: 0,
            round_output: false,
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.zeta >= 0.0) || !self.zeta.is_finite() {
            return Err(Error::InvalidArgument(format!("zeta must be >= 0, got {}", self.zeta)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be > 0, got {}", self.alpha)));
        }
        check_mode_weights(&self.mode_weights, order, 1e-12)?;
        check_iterations(self.t_max, self.eps)
    }
}

/// Discrete-aware low-rank tensor completion.
///
/// Starting from the mean-filled observations, each iteration
///
/// 1. refreshes the auxiliaries `b`, `B` at the current estimate,
/// 2. extrapolates `X̂ = (1 + θ_t) X_t − θ_t X_{t−1}` with `θ_t = (t − 1)/(t + 2)`,
/// 3. takes a gradient step of length `μ ζ` with `μ = 1 / max diag(B)` on the
///    unobserved entries of `X̂` while pinning the observed ones to `o`,
/// 4. applies the weighted per-mode SVT proximal step.
///
/// Stops once the relative change falls below `cfg.eps` or after `cfg.t_max`
/// iterations.
pub fn dalrtc(
    o: &DenseTensor,
    mask: &ObservationMask,
    alphabet: &Alphabet,
    cfg: &SolverConfig,
    options: TraceOptions<'_>,
) -> Result<Completion> {
    check_problem(o, mask)?;
    cfg.validate(o.shape().order())?;

    let mut recorder = Recorder::new(o, mask, cfg.eps, options)?;
    let mut current = mean_fill(o, mask)?;
    let mut previous = current.clone();
    let discrete_active = cfg.zeta > 0.0 && mask.unobserved_count() > 0;

    for t in 1..=cfg.t_max {
        let aux = if discrete_active {
            Some(discrete::update_moments(
                &vec_complement(&current, mask)?,
                alphabet,
                cfg.alpha,
            )?)
        } else {
            None
        };

        let mut y = extrapolate(&current, &previous, momentum_weight(t)?);
        if let Some(aux) = &aux {
            let x_hat = vec_complement(&y, mask)?;
            let grad = discrete::grad_h(&x_hat, aux)?;
            let step = discrete::lipschitz_step(aux)? * cfg.zeta;
            for ((&i, &xj), gj) in mask.unobserved_indices().iter().zip(&x_hat).zip(grad) {
                y.data_mut()[i] = xj - step * gj;
            }
        }
        for &i in mask.observed_indices() {
            y.data_mut()[i] = o.data()[i];
        }
        y.ensure_finite("gradient step", t)?;

        let next = snn_prox(&y, cfg.lambda, &cfg.mode_weights)?;
        next.ensure_finite("proximal step", t)?;

        let objective = if options.objective {
            Some(objective(&next, o, mask, cfg, aux.as_ref())?)
        } else {
            None
        };
        let done = recorder.record(t, &current, &next, objective);
        previous = std::mem::replace(&mut current, next);
        if done {
            break;
        }
    }

    if cfg.round_output {
        round_unobserved(&mut current, mask, alphabet);
    }
    Ok(recorder.finish(current))
}

/// `f(X) + ζ h(X) + λ Σ γ_n ‖X_(n)‖_*`, with `h` taken at the auxiliaries of
/// the iteration that produced `x`.
fn objective(
    x: &DenseTensor,
    o: &DenseTensor,
    mask: &ObservationMask,
    cfg: &SolverConfig,
    aux: Option<&FpAuxiliaries>,
) -> Result<f64> {
    let h = match aux {
        Some(aux) => discrete::h_value(&vec_complement(x, mask)?, aux)?,
        None => 0.0,
    };
    let low_rank = weighted_nuclear_norm(x, &cfg.mode_weights)?;
    Ok(data_fidelity(x, o, mask) + cfg.zeta * h + cfg.lambda * low_rank)
}
