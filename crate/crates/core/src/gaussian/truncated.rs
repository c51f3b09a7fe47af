//! Draws from `N(μ, σ²)` conditioned on exceeding a lower bound.
//!
//! For a standardized bound `a < 0` plain rejection accepts with probability
//! above one half. For `a ≥ 0` the translated-exponential proposal
//! `a + Exp(λ)/…` with `λ = (a + √(a² + 4))/2` accepts with probability at
//! least `√(2π)·e^{-1/2}/2 ≈ 0.76`, tending to one as `a → ∞`, so the
//! expected cost per draw is bounded uniformly in the bound.

use rand::Rng;
use rand_distr::{Exp1, Open01, StandardNormal};

/// Standard normal conditioned on `Z > a`. The result is strictly above `a`.
pub fn standard_truncated_normal<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a.is_nan() {
        return f64::NAN;
    }
    if a < 0.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z > a {
                return z;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / lambda;
        let u: f64 = rng.sample(Open01);
        let d = z - lambda;
        if z > a && u.ln() <= -0.5 * d * d {
            return z;
        }
    }
}

/// `X ~ N(mu, sigma²)` conditioned on `X > lower`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mu: f64, sigma: f64, lower: f64, rng: &mut R) -> f64 {
    debug_assert!(sigma > 0.0);
    let a = (lower - mu) / sigma;
    let x = mu + sigma * standard_truncated_normal(a, rng);
    if x > lower {
        x
    } else {
        // mu + sigma·z can round onto the bound.
        lower.next_up()
    }
}
