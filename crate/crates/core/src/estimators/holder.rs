//! Importance sampling for Hölder-continuous fields on a random discretization.
//!
//! Each replicate draws `M` fresh uniform locations and runs the finite-field
//! mixture at the lowered level `γ = b − a/b`. The estimator is unbiased for
//! `E_U[P(max_j X(U_j) > γ)]`, which approaches the continuum probability
//! `P(sup X > b)` as `a → 0` and `M → ∞` at the rates chosen by
//! [`param_select`].

use serde::Serialize;

use super::finite::FiniteSampler;
use super::{simulate, validate_level, validate_n, Algorithm, EstimatorResult, LevelSpec, ReplicateOutcome, ReplicateSampler, RunOptions};
use crate::discretization::{uniform_points, PointSet};
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::gaussian::JitterPolicy;
use crate::rng::{SeedSequence, StreamRng};

/// Overrides and unknown constants for [`param_select`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderOverrides {
    pub a: Option<f64>,
    pub m: Option<usize>,
    /// Slack exponent `v > 0` in the rate constants.
    pub v: f64,
    pub m_max: usize,
}

impl Default for HolderOverrides {
    fn default() -> Self {
        Self {
            a: None,
            m: None,
            v: 0.5,
            m_max: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderParams {
    pub a: f64,
    #[serde(rename = "M")]
    pub m: usize,
    /// The rate formula asked for more than `m_max` points.
    pub m_capped: bool,
    pub rho: f64,
    /// `(4 + 4v)d/β`, the power of `b/a` in the point count.
    pub exponent: f64,
    /// Uncapped, unrounded point count from the rate formula.
    pub m_formula: f64,
}

/// Undershoot `a` and point count `M` from the complexity rates, with the
/// unknown constants set to one:
/// `ρ = 2d/β + dv + 1`, `a = min(1, ε b^{−ρ} / 4)`,
/// `M = ⌈ε⁻¹ (b/a)^{(4+4v)d/β}⌉` capped at `m_max`.
pub fn param_select(b: f64, epsilon: f64, model: &FieldModel, overrides: &HolderOverrides) -> Result<HolderParams> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::config("run.b", format!("must be positive, got {b}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::config("run.epsilon", format!("must lie in (0, 1], got {epsilon}")));
    }
    let v = overrides.v;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config("overrides.v", format!("must be positive, got {v}")));
    }
    if overrides.m_max == 0 {
        return Err(Error::config("overrides.M_max", "must be at least 1"));
    }
    let d = model.dimension() as f64;
    let beta = model.kernel.holder_exponent();
    let rho = 2.0 * d / beta + d * v + 1.0;
    let a = match overrides.a {
        Some(a) if !(a.is_finite() && a > 0.0) => {
            return Err(Error::config("overrides.a", format!("must be positive, got {a}")));
        }
        Some(a) => a,
        None => (epsilon * b.powf(-rho) / 4.0).min(1.0),
    };
    let exponent = (4.0 + 4.0 * v) * d / beta;
    let m_formula = (b / a).powf(exponent) / epsilon;
    let (m, m_capped) = match overrides.m {
        Some(0) => return Err(Error::config("overrides.M", "must be at least 1")),
        Some(m) => (m, false),
        None if m_formula.ceil() > overrides.m_max as f64 || !m_formula.is_finite() => (overrides.m_max, true),
        None => ((m_formula.ceil() as usize).max(1), false),
    };
    Ok(HolderParams {
        a,
        m,
        m_capped,
        rho,
        exponent,
        m_formula,
    })
}

/// Mixture sampler over `m` fresh uniform points per replicate.
#[derive(Debug, Clone)]
pub struct HolderSampler {
    model: FieldModel,
    m: usize,
    level: LevelSpec,
    jitter: JitterPolicy,
}

impl HolderSampler {
    pub fn new(model: &FieldModel, m: usize, level: LevelSpec, jitter: JitterPolicy) -> Result<Self> {
        validate_level(level.b)?;
        if m == 0 {
            return Err(Error::Argument("need at least one point".into()));
        }
        if !(level.a > 0.0) {
            return Err(Error::Argument(format!("undershoot must be positive, got {}", level.a)));
        }
        Ok(Self {
            model: model.clone(),
            m,
            level,
            jitter,
        })
    }
}

impl ReplicateSampler for HolderSampler {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Holder
    }

    fn level(&self) -> LevelSpec {
        self.level
    }

    fn size(&self) -> usize {
        self.m
    }

    fn replicate(&self, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
        let points = uniform_points(&self.model.domain, self.m, rng)?;
        let inner = FiniteSampler::with_level(&self.model, &points, self.level, self.jitter)?;
        let (i, values, count) = inner.draw(rng)?;
        Ok(ReplicateOutcome {
            selected_index: i,
            exceeded_b: values.iter().any(|&v| v > self.level.b),
            field_values: values,
            likelihood_ratio: inner.total_tail() / count as f64,
            num_exceed_gamma: count,
            points: Some(points),
        })
    }

    fn points_of<'a>(&'a self, outcome: &'a ReplicateOutcome) -> &'a PointSet {
        outcome.points.as_ref().expect("fresh points are recorded")
    }
}

pub fn holder_is_replicate(model: &FieldModel, m: usize, level: LevelSpec, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
    HolderSampler::new(model, m, level, JitterPolicy::default())?.replicate(rng)
}

pub fn run_algorithm_2(
    model: &FieldModel,
    b: f64,
    epsilon: f64,
    n: usize,
    seeds: &SeedSequence,
    overrides: &HolderOverrides,
    options: &RunOptions,
) -> Result<EstimatorResult> {
    validate_n(n)?;
    let params = param_select(b, epsilon, model, overrides)?;
    let sampler = HolderSampler::new(model, params.m, LevelSpec::undershoot(b, params.a), options.jitter)?;
    let mut result = simulate(&sampler, n, &seeds.derive_tag("holder"), options)?;
    result.epsilon = Some(epsilon);
    result.m_capped = params.m_capped;
    Ok(result)
}
