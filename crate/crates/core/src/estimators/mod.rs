//! Crude Monte Carlo and the three importance-sampling estimators, plus the
//! ratio estimator for conditional expectations.
//!
//! Every importance sampler follows the same recipe: pick a coordinate `i`
//! from a mixture, force `X_i` above the effective level with a truncated
//! normal draw, sample the other coordinates from their conditional law
//! given `X_i`, and return the likelihood ratio of the nominal law against
//! the mixture. The samplers differ in the point set, the mixture weights and
//! the effective level.

use std::time::Instant;

use rand::Rng;
use rand_distr::Open01;
use serde::Serialize;

use crate::discretization::{regular_grid, PointSet};
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::gaussian::{assemble_cov, log_normal_tail, log_sum_exp, normal_tail, CovMatrix, JitterPolicy};
use crate::rng::{SeedSequence, StreamRng};
use crate::stats::{run_blocks, Moments};

pub mod finite;
pub mod holder;
pub mod naive;
pub mod ratio;
pub mod smooth;

pub use finite::{finite_is_replicate, run_algorithm_1, FiniteSampler};
pub use holder::{holder_is_replicate, param_select, run_algorithm_2, HolderOverrides, HolderParams, HolderSampler};
pub use naive::{naive_mc, naive_mc_uniform, NaiveSampler, NaiveUniformSampler};
pub use ratio::{conditional_expectation, ratio_estimate, Functional, PathFunctional, PathView, RatioResult};
pub use smooth::{recommended_n, run_algorithm_3, smooth_is_replicate, SmoothSampler, SmoothSettings};

pub use crate::stats::median_trick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Naive,
    Finite,
    Holder,
    Smooth,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Naive => "naive",
            Algorithm::Finite => "finite",
            Algorithm::Holder => "holder",
            Algorithm::Smooth => "smooth",
        }
    }
}

/// Excursion level `b` and the effective level the mixture forces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSpec {
    pub b: f64,
    /// Undershoot parameter; zero when the estimator does not use one.
    pub a: f64,
    pub gamma: f64,
}

impl LevelSpec {
    /// Level for the finite-field estimator and crude Monte Carlo: `γ = b`.
    pub fn exact(b: f64) -> Self {
        Self { b, a: 0.0, gamma: b }
    }

    /// `γ = b − a/b`.
    pub fn undershoot(b: f64, a: f64) -> Self {
        Self { b, a, gamma: b - a / b }
    }

    /// `γ = b − 1/b`, used on θ-regular lattices.
    pub fn smooth(b: f64) -> Self {
        Self::undershoot(b, 1.0)
    }
}

/// One importance-sampling draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub selected_index: usize,
    pub field_values: Vec<f64>,
    pub likelihood_ratio: f64,
    /// `max_j X_j > b`.
    pub exceeded_b: bool,
    /// `#{j : X_j > γ}`, at least one.
    pub num_exceed_gamma: usize,
    /// Locations of this draw when the sampler draws fresh points.
    pub points: Option<PointSet>,
}

/// Produces i.i.d. replicates of an importance-sampling likelihood ratio.
pub trait ReplicateSampler: Sync {
    fn algorithm(&self) -> Algorithm;
    fn level(&self) -> LevelSpec;
    fn size(&self) -> usize;
    fn replicate(&self, rng: &mut StreamRng) -> Result<ReplicateOutcome>;
    /// Points the draw's field values refer to.
    fn points_of<'a>(&'a self, outcome: &'a ReplicateOutcome) -> &'a PointSet;
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorResult {
    pub algorithm: Algorithm,
    pub estimate: f64,
    pub std_error: f64,
    /// Sample coefficient of variation of a single replicate.
    pub cv: Option<f64>,
    /// Empirical `E[L²] / estimate²`.
    pub second_moment_ratio: Option<f64>,
    /// Empirical `Var(L) / estimate²`.
    pub relative_variance: Option<f64>,
    pub n: u64,
    #[serde(rename = "M")]
    pub m: usize,
    pub b: f64,
    pub a: Option<f64>,
    pub gamma: f64,
    pub theta: Option<f64>,
    pub epsilon: Option<f64>,
    pub m_capped: bool,
    pub recommended_n: Option<u64>,
    pub seed: u64,
    pub wall_time_s: Option<f64>,
    #[serde(skip)]
    pub samples: Option<Vec<f64>>,
}

impl EstimatorResult {
    pub(crate) fn from_moments(algorithm: Algorithm, moments: &Moments, m: usize, level: LevelSpec, seed: u64) -> Self {
        let ratio = |x: f64| (moments.mean > 0.0).then(|| x / (moments.mean * moments.mean));
        Self {
            algorithm,
            estimate: moments.mean,
            std_error: moments.std_error(),
            cv: moments.cv(),
            second_moment_ratio: ratio(moments.second_moment()),
            relative_variance: ratio(moments.variance()),
            n: moments.count,
            m,
            b: level.b,
            a: (level.a > 0.0).then_some(level.a),
            gamma: level.gamma,
            theta: None,
            epsilon: None,
            m_capped: false,
            recommended_n: None,
            seed,
            wall_time_s: None,
            samples: None,
        }
    }
}

/// Estimator choice with its discretization settings; the level is supplied
/// separately so one method can be swept over levels.
#[derive(Debug, Clone)]
pub enum Method {
    Naive { points: PointSet },
    Finite { points: PointSet },
    Holder { epsilon: f64, overrides: HolderOverrides },
    Smooth { epsilon: f64, settings: SmoothSettings },
}

impl Method {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Method::Naive { .. } => Algorithm::Naive,
            Method::Finite { .. } => Algorithm::Finite,
            Method::Holder { .. } => Algorithm::Holder,
            Method::Smooth { .. } => Algorithm::Smooth,
        }
    }

    /// Replicate sampler at level `b`.
    pub fn sampler(&self, model: &FieldModel, b: f64, jitter: JitterPolicy) -> Result<Box<dyn ReplicateSampler>> {
        Ok(match self {
            Method::Naive { points } => Box::new(NaiveSampler::new(model, points, b, jitter)?),
            Method::Finite { points } => Box::new(FiniteSampler::new(model, points, b, jitter)?),
            Method::Holder { epsilon, overrides } => {
                let p = param_select(b, *epsilon, model, overrides)?;
                Box::new(HolderSampler::new(model, p.m, LevelSpec::undershoot(b, p.a), jitter)?)
            }
            Method::Smooth { epsilon, settings } => {
                if !(b > 0.0) {
                    return Err(Error::config("run.b", format!("must be positive, got {b}")));
                }
                let theta = settings.theta.unwrap_or(epsilon / b);
                let grid = regular_grid(&model.domain, theta)?;
                Box::new(SmoothSampler::new(model, &grid, b, jitter)?)
            }
        })
    }

    /// Estimate of the exceedance probability at level `b`.
    pub fn estimate(&self, model: &FieldModel, b: f64, n: usize, seeds: &SeedSequence, options: &RunOptions) -> Result<EstimatorResult> {
        match self {
            Method::Naive { points } => naive_mc(model, points, b, n, seeds, options),
            Method::Finite { points } => run_algorithm_1(model, points, b, n, seeds, options),
            Method::Holder { epsilon, overrides } => run_algorithm_2(model, b, *epsilon, n, seeds, overrides, options),
            Method::Smooth { epsilon, settings } => run_algorithm_3(model, b, *epsilon, n, seeds, settings, options),
        }
    }
}

/// Knobs shared by every estimator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub jitter: JitterPolicy,
    /// Retain per-replicate values (needed for bootstrap and batching).
    pub keep_samples: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jitter: JitterPolicy::default(),
            keep_samples: false,
        }
    }
}

/// Averages `n` likelihood ratios, replicate `k` drawing from stream `k`.
pub fn simulate<S: ReplicateSampler + ?Sized>(sampler: &S, n: usize, seeds: &SeedSequence, options: &RunOptions) -> Result<EstimatorResult> {
    let start = Instant::now();
    let blocks = run_blocks(n, |range| {
        let mut moments = Moments::default();
        let mut kept = Vec::new();
        for k in range {
            let outcome = sampler.replicate(&mut seeds.stream(k))?;
            moments.push(outcome.likelihood_ratio);
            if options.keep_samples {
                kept.push(outcome.likelihood_ratio);
            }
        }
        Ok((moments, kept))
    })?;
    let mut moments = Moments::default();
    let mut samples = options.keep_samples.then(|| Vec::with_capacity(n));
    for (m, kept) in blocks {
        moments.merge(&m);
        if let Some(s) = samples.as_mut() {
            s.extend(kept);
        }
    }
    let mut result = EstimatorResult::from_moments(sampler.algorithm(), &moments, sampler.size(), sampler.level(), seeds.master());
    result.samples = samples;
    result.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(result)
}

/// Index drawn with probability proportional to `exp(log_weights[i])`, by
/// maximizing `log_weights[i] + Gumbel noise`. Needs no normalization, so
/// weights that underflow in linear space are still handled.
pub(crate) fn gumbel_select<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let mut best = 0;
    let mut best_key = f64::NEG_INFINITY;
    for (i, &lw) in log_weights.iter().enumerate() {
        let u: f64 = rng.sample(Open01);
        let key = lw - (-u.ln()).ln();
        if key > best_key {
            best = i;
            best_key = key;
        }
    }
    best
}

/// Means, standard deviations and covariance of the field at `points`.
pub(crate) struct Snapshot {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub cov: CovMatrix,
}

impl Snapshot {
    pub fn new(model: &FieldModel, points: &PointSet) -> Result<Self> {
        let cov = assemble_cov(model, points)?;
        let means = points.iter().map(|t| model.mean.eval(t)).collect();
        let sds = (0..cov.order()).map(|i| cov.get(i, i).sqrt()).collect();
        Ok(Self { means, sds, cov })
    }
}

/// Mixture over coordinates with weights `Ψ((γ − μ_i)/σ_i)`.
pub(crate) struct Mixture {
    /// Unnormalized log weights, used for selection.
    pub log_weights: Vec<f64>,
    /// `Σ_i Ψ((γ − μ_i)/σ_i)`, summed in linear space so a single point
    /// reproduces the tail probability bit for bit.
    pub total: f64,
}

impl Mixture {
    pub fn new(means: &[f64], sds: &[f64], gamma: f64) -> Result<Self> {
        let z: Vec<f64> = means.iter().zip(sds).map(|(mu, sd)| (gamma - mu) / sd).collect();
        let log_weights: Vec<f64> = z.iter().map(|&x| log_normal_tail(x)).collect();
        let log_total = log_sum_exp(&log_weights);
        let total: f64 = z.iter().map(|&x| normal_tail(x)).sum();
        if !log_total.is_finite() || !(total >= f64::MIN_POSITIVE) || !total.is_finite() {
            return Err(Error::LevelOutOfRange {
                level: gamma,
                reason: format!("sum of marginal exceedance probabilities exp({log_total:.1}) underflows"),
            });
        }
        Ok(Self { log_weights, total })
    }
}

pub(crate) fn validate_level(b: f64) -> Result<()> {
    if !b.is_finite() {
        return Err(Error::Argument(format!("level must be finite, got {b}")));
    }
    Ok(())
}

pub(crate) fn validate_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Argument("number of replicates must be at least 1".into()));
    }
    Ok(())
}
