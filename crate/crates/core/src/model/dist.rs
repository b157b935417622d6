//! Log mass and density functions used by the likelihood and priors.

use std::f64::consts::PI;

use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `ln Γ(n + θ) − ln Γ(θ)`, summed directly for small n at large θ, where the
/// gamma-function difference would cancel catastrophically.
fn ln_rising(theta: f64, n: u64) -> f64 {
    if n < 64 && theta > 1e3 {
        (0..n).map(|k| (theta + k as f64).ln()).sum()
    } else {
        ln_gamma(theta + n as f64) - ln_gamma(theta)
    }
}

/// Negative binomial with mean λ and dispersion θ (variance λ + λ²/θ).
pub fn negbin_logpmf(n: i64, lambda: f64, theta: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::NegativeCount(n));
    }
    Ok(negbin_ln_pmf(n as u64, lambda, theta))
}

pub fn negbin_ln_pmf(n: u64, lambda: f64, theta: f64) -> f64 {
    if !(theta > 0.0) || lambda < 0.0 {
        return f64::NEG_INFINITY;
    }
    if lambda == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    let ln_total = (theta + lambda).ln();
    ln_rising(theta, n) - ln_factorial(n) - theta * (lambda / theta).ln_1p() + nf * (lambda.ln() - ln_total)
}

pub fn binomial_ln_pmf(n: u64, trials: u64, p: f64) -> f64 {
    if n > trials {
        return f64::NEG_INFINITY;
    }
    let ln_choose = ln_factorial(trials) - ln_factorial(n) - ln_factorial(trials - n);
    ln_choose + xlogy(n as f64, p) + xlogy((trials - n) as f64, 1.0 - p)
}

/// Binomial log mass with `p = logistic(eta)`, stable for large |eta|.
pub(crate) fn binomial_ln_pmf_logit(n: u64, trials: u64, eta: f64) -> f64 {
    if n > trials {
        return f64::NEG_INFINITY;
    }
    let ln_choose = ln_factorial(trials) - ln_factorial(n) - ln_factorial(trials - n);
    ln_choose + n as f64 * ln_inv_logit(eta) + (trials - n) as f64 * ln_inv_logit(-eta)
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

pub fn poisson_ln_pmf(z: u64, mu: f64) -> f64 {
    if mu < 0.0 {
        return f64::NEG_INFINITY;
    }
    if mu == 0.0 {
        return if z == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    z as f64 * mu.ln() - mu - ln_factorial(z)
}

pub fn laplace_ln_pdf(x: f64, location: f64, scale: f64) -> f64 {
    -(2.0 * scale).ln() - (x - location).abs() / scale
}

/// Gamma density in the shape/scale parameterisation; zero outside `(0, ∞)`.
pub fn gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Exponential density with the given rate; zero outside `(0, ∞)`.
pub fn exponential_ln_pdf(x: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    rate.ln() - rate * x
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

pub fn inv_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln logistic(eta) = −ln(1 + e^{−eta})`.
pub fn ln_inv_logit(eta: f64) -> f64 {
    if eta > 0.0 {
        -(-eta).exp().ln_1p()
    } else {
        eta - eta.exp().ln_1p()
    }
}

/// Gamma–Poisson mixture draw with mean λ and dispersion θ.
pub fn sample_negbin<R: rand::Rng + ?Sized>(lambda: f64, theta: f64, rng: &mut R) -> u64 {
    use rand_distr::{Distribution, Gamma, Poisson};
    let rate = Gamma::new(theta, lambda / theta)
        .expect("positive shape and scale")
        .sample(rng);
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}
