//! Importance sampling for the maximum of a finite Gaussian vector.
//!
//! The sampling law is the mixture `Σ_i p_i P(· | X_i > b)` with
//! `p_i ∝ P(X_i > b)`. Its likelihood ratio against the nominal law is
//! `L = Σ_j P(X_j > b) / #{j : X_j > b}`, bounded by `Σ_j P(X_j > b)`.

use std::sync::OnceLock;

use super::{gumbel_select, simulate, validate_level, validate_n, Algorithm, EstimatorResult, LevelSpec, Mixture, ReplicateOutcome, ReplicateSampler, RunOptions, Snapshot};
use crate::discretization::PointSet;
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::gaussian::{sample_truncated_normal, CoordinateConditioner, CovMatrix, JitterPolicy};
use crate::rng::{SeedSequence, StreamRng};

/// Mixture sampler over a fixed point set. Conditioners are built the first
/// time an index is selected and shared across threads afterwards.
#[derive(Debug)]
pub struct FiniteSampler {
    points: PointSet,
    level: LevelSpec,
    means: Vec<f64>,
    sds: Vec<f64>,
    cov: CovMatrix,
    log_weights: Vec<f64>,
    total: f64,
    jitter: JitterPolicy,
    conditioners: Vec<OnceLock<Result<CoordinateConditioner>>>,
}

impl FiniteSampler {
    pub fn new(model: &FieldModel, points: &PointSet, b: f64, jitter: JitterPolicy) -> Result<Self> {
        Self::with_level(model, points, LevelSpec::exact(b), jitter)
    }

    /// Mixture forcing exceedance of `level.gamma`; the likelihood ratio
    /// counts exceedances of `gamma` as well.
    pub(crate) fn with_level(model: &FieldModel, points: &PointSet, level: LevelSpec, jitter: JitterPolicy) -> Result<Self> {
        validate_level(level.b)?;
        if points.is_empty() {
            return Err(Error::Argument("need at least one point".into()));
        }
        let snap = Snapshot::new(model, points)?;
        let mixture = Mixture::new(&snap.means, &snap.sds, level.gamma)?;
        Ok(Self {
            points: points.clone(),
            level,
            conditioners: (0..points.len()).map(|_| OnceLock::new()).collect(),
            means: snap.means,
            sds: snap.sds,
            cov: snap.cov,
            log_weights: mixture.log_weights,
            total: mixture.total,
            jitter,
        })
    }

    /// `Σ_j P(X_j > γ)`, the bound on the likelihood ratio.
    pub fn total_tail(&self) -> f64 {
        self.total
    }

    fn conditioner(&self, i: usize) -> Result<&CoordinateConditioner> {
        self.conditioners[i]
            .get_or_init(|| CoordinateConditioner::new(self.cov.matrix(), &self.means, i, self.jitter))
            .as_ref()
            .map_err(Error::replay)
    }

    pub(crate) fn draw(&self, rng: &mut StreamRng) -> Result<(usize, Vec<f64>, usize)> {
        let gamma = self.level.gamma;
        let i = gumbel_select(&self.log_weights, rng);
        let x = sample_truncated_normal(self.means[i], self.sds[i], gamma, rng);
        let m = self.points.len();
        let mut values = vec![0.0; m];
        let mut scratch = vec![0.0; 2 * (m - 1)];
        self.conditioner(i)?.sample_into(x, rng, &mut scratch, &mut values);
        let count = values.iter().filter(|&&v| v > gamma).count();
        if count == 0 {
            return Err(Error::Internal("forced coordinate does not exceed the level".into()));
        }
        Ok((i, values, count))
    }
}

impl ReplicateSampler for FiniteSampler {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Finite
    }

    fn level(&self) -> LevelSpec {
        self.level
    }

    fn size(&self) -> usize {
        self.points.len()
    }

    fn replicate(&self, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
        let (i, values, count) = self.draw(rng)?;
        let exceeded_b = values.iter().any(|&v| v > self.level.b);
        Ok(ReplicateOutcome {
            selected_index: i,
            field_values: values,
            likelihood_ratio: self.total / count as f64,
            exceeded_b,
            num_exceed_gamma: count,
            points: None,
        })
    }

    fn points_of<'a>(&'a self, _outcome: &'a ReplicateOutcome) -> &'a PointSet {
        &self.points
    }
}

/// One replicate. Builds the sampler each call; prefer [`FiniteSampler`]
/// when drawing repeatedly.
pub fn finite_is_replicate(model: &FieldModel, points: &PointSet, b: f64, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
    FiniteSampler::new(model, points, b, JitterPolicy::default())?.replicate(rng)
}

/// `P(max_j X(t_j) > b)` from `n` mixture replicates.
pub fn run_algorithm_1(model: &FieldModel, points: &PointSet, b: f64, n: usize, seeds: &SeedSequence, options: &RunOptions) -> Result<EstimatorResult> {
    validate_n(n)?;
    let sampler = FiniteSampler::new(model, points, b, options.jitter)?;
    simulate(&sampler, n, &seeds.derive_tag("finite"), options)
}
