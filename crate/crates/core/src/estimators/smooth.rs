//! Importance sampling for smooth homogeneous fields on a θ-regular lattice.
//!
//! All coordinates share one law, so the mixture is uniform over indices.
//! The forced level is `b − 1/b` and the estimator keeps only paths that
//! also cross `b`:
//! `L̃ = M Ψ((b − 1/b − μ)/σ) / #{j : X_j > b − 1/b} · 1(max_j X_j > b)`.

use std::sync::OnceLock;

use rand::Rng;

use super::{simulate, validate_level, validate_n, Algorithm, EstimatorResult, LevelSpec, ReplicateOutcome, ReplicateSampler, RunOptions, Snapshot};
use crate::discretization::{regular_grid, PointSet};
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::gaussian::{normal_tail, sample_truncated_normal, CoordinateConditioner, CovMatrix, JitterPolicy};
use crate::rng::{SeedSequence, StreamRng};

#[derive(Debug)]
pub struct SmoothSampler {
    grid: PointSet,
    level: LevelSpec,
    mean: f64,
    sd: f64,
    means: Vec<f64>,
    cov: CovMatrix,
    /// `M · P(X_1 > b − 1/b)`, the bound on `L̃`.
    scale: f64,
    jitter: JitterPolicy,
    conditioners: Vec<OnceLock<Result<CoordinateConditioner>>>,
}

impl SmoothSampler {
    pub fn new(model: &FieldModel, grid: &PointSet, b: f64, jitter: JitterPolicy) -> Result<Self> {
        validate_level(b)?;
        if !model.is_homogeneous() {
            return Err(Error::config("model.mean", "the lattice estimator requires a constant mean"));
        }
        if !(b > 0.0) {
            return Err(Error::Argument(format!("level must be positive, got {b}")));
        }
        if grid.is_empty() {
            return Err(Error::Argument("need at least one point".into()));
        }
        let level = LevelSpec::smooth(b);
        let snap = Snapshot::new(model, grid)?;
        let mean = snap.means[0];
        let sd = model.kernel.variance().sqrt();
        let p = normal_tail((level.gamma - mean) / sd);
        if !(p >= f64::MIN_POSITIVE) {
            return Err(Error::LevelOutOfRange {
                level: level.gamma,
                reason: "marginal exceedance probability underflows".into(),
            });
        }
        Ok(Self {
            level,
            mean,
            sd,
            scale: grid.len() as f64 * p,
            conditioners: (0..grid.len()).map(|_| OnceLock::new()).collect(),
            grid: grid.clone(),
            means: snap.means,
            cov: snap.cov,
            jitter,
        })
    }

    /// `M · P(X_1 > b − 1/b)`.
    pub fn ratio_bound(&self) -> f64 {
        self.scale
    }

    fn conditioner(&self, i: usize) -> Result<&CoordinateConditioner> {
        self.conditioners[i]
            .get_or_init(|| CoordinateConditioner::new(self.cov.matrix(), &self.means, i, self.jitter))
            .as_ref()
            .map_err(Error::replay)
    }
}

impl ReplicateSampler for SmoothSampler {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Smooth
    }

    fn level(&self) -> LevelSpec {
        self.level
    }

    fn size(&self) -> usize {
        self.grid.len()
    }

    fn replicate(&self, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
        let m = self.grid.len();
        let gamma = self.level.gamma;
        let i = rng.random_range(0..m);
        let x = sample_truncated_normal(self.mean, self.sd, gamma, rng);
        let mut values = vec![0.0; m];
        let mut scratch = vec![0.0; 2 * (m - 1)];
        self.conditioner(i)?.sample_into(x, rng, &mut scratch, &mut values);
        let count = values.iter().filter(|&&v| v > gamma).count();
        if count == 0 {
            return Err(Error::Internal("forced coordinate does not exceed the level".into()));
        }
        let exceeded_b = values.iter().any(|&v| v > self.level.b);
        Ok(ReplicateOutcome {
            selected_index: i,
            field_values: values,
            likelihood_ratio: if exceeded_b { self.scale / count as f64 } else { 0.0 },
            exceeded_b,
            num_exceed_gamma: count,
            points: None,
        })
    }

    fn points_of<'a>(&'a self, _outcome: &'a ReplicateOutcome) -> &'a PointSet {
        &self.grid
    }
}

/// Grid pitch and sample-size settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothSettings {
    /// Regularity parameter; defaults to `ε/b`.
    pub theta: Option<f64>,
    /// Failure probability used for the recommended replicate count.
    pub delta: f64,
}

impl Default for SmoothSettings {
    fn default() -> Self {
        Self { theta: None, delta: 0.1 }
    }
}

pub fn smooth_is_replicate(model: &FieldModel, grid: &PointSet, b: f64, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
    SmoothSampler::new(model, grid, b, JitterPolicy::default())?.replicate(rng)
}

/// Estimates `P(max X > b)` on the `ε/b`-regular lattice.
pub fn run_algorithm_3(
    model: &FieldModel,
    b: f64,
    epsilon: f64,
    n: usize,
    seeds: &SeedSequence,
    settings: &SmoothSettings,
    options: &RunOptions,
) -> Result<EstimatorResult> {
    validate_n(n)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::config("run.epsilon", format!("must lie in (0, 1], got {epsilon}")));
    }
    if !(settings.delta > 0.0 && settings.delta < 1.0) {
        return Err(Error::config("run.delta", format!("must lie in (0, 1), got {}", settings.delta)));
    }
    if !(b > 0.0) {
        return Err(Error::config("run.b", format!("must be positive, got {b}")));
    }
    let theta = settings.theta.unwrap_or(epsilon / b);
    let grid = regular_grid(&model.domain, theta)?;
    let sampler = SmoothSampler::new(model, &grid, b, options.jitter)?;
    let mut result = simulate(&sampler, n, &seeds.derive_tag("smooth"), options)?;
    result.theta = Some(theta);
    result.epsilon = Some(epsilon);
    result.recommended_n = Some(recommended_n(epsilon, settings.delta));
    Ok(result)
}

/// `⌈ε⁻² δ⁻¹⌉`.
pub fn recommended_n(epsilon: f64, delta: f64) -> u64 {
    // Shave rounding noise so exact products such as 160 do not round up.
    (1.0 / (epsilon * epsilon * delta) * (1.0 - 1e-12)).ceil() as u64
}
