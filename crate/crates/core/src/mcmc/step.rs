//! Random-walk Metropolis primitives and Robbins–Monro scale adaptation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Acceptance-rate target for scalar blocks.
pub const SCALAR_TARGET: f64 = 0.44;
/// Acceptance-rate target for multivariate blocks.
pub const BLOCK_TARGET: f64 = 0.234;

/// Map from the sampled (unconstrained) scale to the parameter's support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// Positive parameters: x = exp(y).
    Log,
    /// Correlations: x = tanh(y).
    Atanh,
}

impl Transform {
    pub fn to_unconstrained(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Atanh => x.atanh(),
        }
    }

    pub fn to_constrained(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::Atanh => y.tanh(),
        }
    }

    /// `log |dx/dy|` at constrained value x.
    pub fn log_jacobian(self, x: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Log => x.ln(),
            Transform::Atanh => (1.0 - x * x).ln(),
        }
    }
}

/// Metropolis accept/reject for a symmetric proposal. NaN ratios reject.
pub fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}

/// Gaussian random-walk proposal on the unconstrained scale.
/// Returns `(proposed constrained value, log Jacobian correction)`.
pub fn propose<R: Rng + ?Sized>(x: f64, scale: f64, transform: Transform, rng: &mut R) -> (f64, f64) {
    let eps: f64 = rng.sample(StandardNormal);
    let proposed = transform.to_constrained(transform.to_unconstrained(x) + scale * eps);
    let correction = transform.log_jacobian(proposed) - transform.log_jacobian(x);
    (proposed, correction)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub value: f64,
    pub log_target: f64,
    pub accepted: bool,
}

/// One random-walk Metropolis step on a scalar with log density `log_target`.
pub fn rw_metropolis_scalar<R: Rng + ?Sized>(
    x: f64,
    current_log_target: f64,
    scale: f64,
    transform: Transform,
    mut log_target: impl FnMut(f64) -> f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    if !current_log_target.is_finite() {
        return Err(Error::NonFiniteState(format!(
            "current log target {current_log_target} at x = {x}"
        )));
    }
    let (proposed, correction) = propose(x, scale, transform, rng);
    let lp = log_target(proposed);
    if accept(lp - current_log_target + correction, rng) {
        Ok(StepOutcome {
            value: proposed,
            log_target: lp,
            accepted: true,
        })
    } else {
        Ok(StepOutcome {
            value: x,
            log_target: current_log_target,
            accepted: false,
        })
    }
}

/// Robbins–Monro step `log σ ← log σ + t^{-0.6} (rate − target)`.
pub fn adapt_scale(scale: f64, acceptance_rate: f64, target: f64, batch: usize) -> f64 {
    let gamma = (batch.max(1) as f64).powf(-0.6);
    (scale.ln() + gamma * (acceptance_rate - target)).exp()
}

/// A proposal scale with acceptance bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveScale {
    scale: f64,
    target: f64,
    batch_accepted: u32,
    batch_proposed: u32,
    batches: usize,
    total_accepted: u64,
    total_proposed: u64,
    frozen_warned: bool,
}

impl AdaptiveScale {
    pub fn new(scale: f64, target: f64) -> Self {
        Self {
            scale,
            target,
            batch_accepted: 0,
            batch_proposed: 0,
            batches: 0,
            total_accepted: 0,
            total_proposed: 0,
            frozen_warned: false,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn record(&mut self, accepted: bool) {
        self.batch_proposed += 1;
        self.total_proposed += 1;
        if accepted {
            self.batch_accepted += 1;
            self.total_accepted += 1;
        }
    }

    /// Closes the current batch. Adapts only while `in_burnin`; afterwards the
    /// scale is frozen and the call is a no-op.
    pub fn end_batch(&mut self, in_burnin: bool) {
        if !in_burnin {
            if !self.frozen_warned {
                log::warn!("adaptation requested after burn-in; scale stays frozen");
                self.frozen_warned = true;
            }
            return;
        }
        if self.batch_proposed > 0 {
            self.batches += 1;
            let rate = self.batch_accepted as f64 / self.batch_proposed as f64;
            self.scale = adapt_scale(self.scale, rate, self.target, self.batches);
        }
        self.batch_accepted = 0;
        self.batch_proposed = 0;
    }

    /// Resets the running totals, e.g. at the end of burn-in.
    pub fn reset_totals(&mut self) {
        self.total_accepted = 0;
        self.total_proposed = 0;
        self.batch_accepted = 0;
        self.batch_proposed = 0;
    }

    /// Floors the scale, e.g. to keep integer jump widths at least one.
    pub fn clamp_min(&mut self, min: f64) {
        self.scale = self.scale.max(min);
    }

    pub fn totals(&self) -> (u64, u64) {
        (self.total_accepted, self.total_proposed)
    }
}
