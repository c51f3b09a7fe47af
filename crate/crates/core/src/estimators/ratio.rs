//! Conditional expectations given an excursion, `E[Γ | max X > b]`, as the
//! ratio of importance-sampling averages `mean(Γ L) / mean(L)`.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::{Algorithm, Method, ReplicateSampler, RunOptions};
use crate::discretization::PointSet;
use crate::error::{Error, Result};
use crate::field::{Domain, FieldModel};
use crate::rng::SeedSequence;
use crate::stats::{run_blocks, PairMoments};

/// What a functional sees of one simulated path.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub values: &'a [f64],
    pub points: &'a PointSet,
    pub selected_index: usize,
    pub domain: &'a Domain,
}

/// Nonnegative path functional bounded above by [`upper_bound`](Self::upper_bound).
pub trait PathFunctional: Send + Sync {
    fn evaluate(&self, path: &PathView<'_>) -> f64;
    fn upper_bound(&self) -> f64;
}

#[derive(Clone)]
pub enum Functional {
    /// `m(T) · #{j : X_j > level} / M`, the discretized excursion volume.
    ExcursionVolume { level: f64 },
    /// `#{j : X_j > level} / M`.
    ExceedFraction { level: f64 },
    Custom(Arc<dyn PathFunctional>),
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::ExcursionVolume { level } => write!(f, "ExcursionVolume({level})"),
            Functional::ExceedFraction { level } => write!(f, "ExceedFraction({level})"),
            Functional::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::ExcursionVolume { .. } => "excursion-volume",
            Functional::ExceedFraction { .. } => "exceed-count-fraction",
            Functional::Custom(_) => "custom-bounded",
        }
    }

    fn fraction_above(values: &[f64], level: f64) -> f64 {
        values.iter().filter(|&&v| v > level).count() as f64 / values.len() as f64
    }

    pub fn upper_bound(&self, domain: &Domain) -> f64 {
        match self {
            Functional::ExcursionVolume { .. } => domain.volume(),
            Functional::ExceedFraction { .. } => 1.0,
            Functional::Custom(f) => f.upper_bound(),
        }
    }

    /// Value on one path, checked against `[0, upper_bound]`.
    pub fn evaluate(&self, path: &PathView<'_>) -> Result<f64> {
        let value = match self {
            Functional::ExcursionVolume { level } => path.domain.volume() * Self::fraction_above(path.values, *level),
            Functional::ExceedFraction { level } => Self::fraction_above(path.values, *level),
            Functional::Custom(f) => f.evaluate(path),
        };
        let cap = self.upper_bound(path.domain);
        if !(0.0..=cap).contains(&value) {
            return Err(Error::Argument(format!(
                "functional {} returned {value}, outside [0, {cap}]",
                self.name()
            )));
        }
        Ok(value)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioResult {
    pub algorithm: Algorithm,
    pub functional: &'static str,
    pub estimate: f64,
    /// Delta-method standard error of the ratio.
    pub std_error: f64,
    /// `mean(L)`, itself an estimate of the conditioning probability.
    pub denominator: f64,
    pub n: u64,
    #[serde(rename = "M")]
    pub m: usize,
    pub b: f64,
    pub gamma: f64,
    pub seed: u64,
    pub wall_time_s: Option<f64>,
}

/// Ratio estimate over `n` replicates of `sampler`.
pub fn ratio_estimate<S: ReplicateSampler + ?Sized>(
    sampler: &S,
    domain: &Domain,
    functional: &Functional,
    n: usize,
    seeds: &SeedSequence,
) -> Result<RatioResult> {
    let start = Instant::now();
    let blocks = run_blocks(n, |range| {
        let mut acc = PairMoments::default();
        for k in range {
            let outcome = sampler.replicate(&mut seeds.stream(k))?;
            let l = outcome.likelihood_ratio;
            let gamma_value = if l > 0.0 {
                let view = PathView {
                    values: &outcome.field_values,
                    points: sampler.points_of(&outcome),
                    selected_index: outcome.selected_index,
                    domain,
                };
                functional.evaluate(&view)?
            } else {
                0.0
            };
            acc.push(gamma_value * l, l);
        }
        Ok(acc)
    })?;
    let mut acc = PairMoments::default();
    for b in &blocks {
        acc.merge(b);
    }
    let (estimate, std_error) = acc.ratio()?;
    let level = sampler.level();
    Ok(RatioResult {
        algorithm: sampler.algorithm(),
        functional: functional.name(),
        estimate,
        std_error,
        denominator: acc.mean_x,
        n: acc.count,
        m: sampler.size(),
        b: level.b,
        gamma: level.gamma,
        seed: seeds.master(),
        wall_time_s: Some(start.elapsed().as_secs_f64()),
    })
}

/// `E[Γ | max X > b]` with the sampler chosen by `method`. Under the
/// undershoot method the conditioning event is crossing `γ` instead of `b`.
pub fn conditional_expectation(
    model: &FieldModel,
    method: &Method,
    functional: &Functional,
    b: f64,
    n: usize,
    seeds: &SeedSequence,
    options: &RunOptions,
) -> Result<RatioResult> {
    super::validate_n(n)?;
    let sampler = method.sampler(model, b, options.jitter)?;
    ratio_estimate(sampler.as_ref(), &model.domain, functional, n, &seeds.derive_tag("ratio"))
}
