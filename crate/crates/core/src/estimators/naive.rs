//! Crude Monte Carlo: simulate the whole field and record `1(max X > b)`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{simulate, validate_level, validate_n, Algorithm, EstimatorResult, LevelSpec, ReplicateOutcome, ReplicateSampler, RunOptions, Snapshot};
use crate::discretization::{uniform_points, PointSet};
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::gaussian::{cholesky, cholesky_matrix, CholeskyFactor, JitterPolicy};
use crate::rng::{SeedSequence, StreamRng};

fn indicator_outcome(values: Vec<f64>, level: f64, points: Option<PointSet>) -> ReplicateOutcome {
    let (argmax, max) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, v)| if v > best.1 { (j, v) } else { best });
    let count = values.iter().filter(|&&v| v > level).count();
    ReplicateOutcome {
        selected_index: argmax,
        likelihood_ratio: if max > level { 1.0 } else { 0.0 },
        exceeded_b: max > level,
        num_exceed_gamma: count,
        field_values: values,
        points,
    }
}

fn draw<R: Rng + ?Sized>(means: &[f64], factor: &CholeskyFactor, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..means.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mut values = vec![0.0; means.len()];
    factor.transform_into(means, &z, &mut values);
    values
}

/// Crude Monte Carlo on a fixed point set.
#[derive(Debug, Clone)]
pub struct NaiveSampler {
    points: PointSet,
    means: Vec<f64>,
    factor: CholeskyFactor,
    level: f64,
}

impl NaiveSampler {
    pub fn new(model: &FieldModel, points: &PointSet, b: f64, jitter: JitterPolicy) -> Result<Self> {
        validate_level(b)?;
        let snap = Snapshot::new(model, points)?;
        let factor = cholesky(&snap.cov, jitter)?;
        Ok(Self {
            points: points.clone(),
            means: snap.means,
            factor,
            level: b,
        })
    }
}

impl ReplicateSampler for NaiveSampler {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Naive
    }

    fn level(&self) -> LevelSpec {
        LevelSpec::exact(self.level)
    }

    fn size(&self) -> usize {
        self.points.len()
    }

    fn replicate(&self, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
        Ok(indicator_outcome(draw(&self.means, &self.factor, rng), self.level, None))
    }

    fn points_of<'a>(&'a self, _outcome: &'a ReplicateOutcome) -> &'a PointSet {
        &self.points
    }
}

/// Crude Monte Carlo on `m` fresh uniform points per replicate. This is the
/// quantity the undershoot estimator targets: `P(max_j X(U_j) > level)`.
#[derive(Debug, Clone)]
pub struct NaiveUniformSampler {
    model: FieldModel,
    m: usize,
    level: f64,
    jitter: JitterPolicy,
}

impl NaiveUniformSampler {
    pub fn new(model: &FieldModel, m: usize, level: f64, jitter: JitterPolicy) -> Result<Self> {
        validate_level(level)?;
        if m == 0 {
            return Err(Error::Argument("need at least one point".into()));
        }
        Ok(Self {
            model: model.clone(),
            m,
            level,
            jitter,
        })
    }
}

impl ReplicateSampler for NaiveUniformSampler {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Naive
    }

    fn level(&self) -> LevelSpec {
        LevelSpec::exact(self.level)
    }

    fn size(&self) -> usize {
        self.m
    }

    fn replicate(&self, rng: &mut StreamRng) -> Result<ReplicateOutcome> {
        let points = uniform_points(&self.model.domain, self.m, rng)?;
        let snap = Snapshot::new(&self.model, &points)?;
        let factor = cholesky_matrix(snap.cov.matrix(), self.jitter)?;
        let values = draw(&snap.means, &factor, rng);
        Ok(indicator_outcome(values, self.level, Some(points)))
    }

    fn points_of<'a>(&'a self, outcome: &'a ReplicateOutcome) -> &'a PointSet {
        outcome.points.as_ref().expect("fresh points are recorded")
    }
}

/// `P(max_j X(t_j) > b)` by crude Monte Carlo.
pub fn naive_mc(model: &FieldModel, points: &PointSet, b: f64, n: usize, seeds: &SeedSequence, options: &RunOptions) -> Result<EstimatorResult> {
    validate_n(n)?;
    let sampler = NaiveSampler::new(model, points, b, options.jitter)?;
    simulate(&sampler, n, &seeds.derive_tag("naive"), options)
}

/// `P(max_j X(U_j) > level)` with `U_j` i.i.d. uniform, fresh per replicate.
pub fn naive_mc_uniform(model: &FieldModel, m: usize, level: f64, n: usize, seeds: &SeedSequence, options: &RunOptions) -> Result<EstimatorResult> {
    validate_n(n)?;
    let sampler = NaiveUniformSampler::new(model, m, level, options.jitter)?;
    simulate(&sampler, n, &seeds.derive_tag("naive-uniform"), options)
}
