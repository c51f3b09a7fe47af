//! Level sweeps, refinement-bias studies and oracle comparisons.
//!
//! Each study returns rows in a fixed order and draws every random number
//! from streams derived from one master seed, so a study is a pure function
//! of its inputs.

use serde::Serialize;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::discretization::{lattice, nested_indices, odd_lattice_counts, regular_grid};
use crate::error::{Error, Result};
use crate::estimators::{naive_mc, naive_mc_uniform, param_select, simulate, EstimatorResult, Method, RunOptions, SmoothSampler};
use crate::field::FieldModel;
use crate::gaussian::{assemble_cov, cholesky};
use crate::rng::SeedSequence;
use crate::stats::{bootstrap_se, median_of_means, run_blocks, Moments, PairMoments};

/// Bootstrap resamples for the error bars on `cv` and `variance_ratio`.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub model: FieldModel,
    pub method: Method,
    /// Strictly increasing levels.
    pub levels: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    /// Odd batch count for the median of batch means; 0 disables it.
    pub batches: usize,
    /// Replicates for a crude Monte Carlo column on the same target.
    pub n_naive: Option<usize>,
    pub options: RunOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub b: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub cv: Option<f64>,
    pub cv_se: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub a: Option<f64>,
    pub gamma: f64,
    pub theta: Option<f64>,
    /// `Var(L) / estimate²`.
    pub variance_ratio: Option<f64>,
    pub variance_ratio_se: Option<f64>,
    /// `E[L²] / estimate²`.
    pub second_moment_ratio: Option<f64>,
    pub median_of_means: Option<f64>,
    pub m_capped: bool,
    pub naive_estimate: Option<f64>,
    pub naive_std_error: Option<f64>,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRecord<R> {
    pub study: &'static str,
    pub seed: u64,
    pub rows: Vec<R>,
}

/// Removes wall-clock fields so documents can be compared byte for byte.
pub trait Timed {
    fn clear_timing(&mut self);
}

impl Timed for EstimatorResult {
    fn clear_timing(&mut self) {
        self.wall_time_s = None;
    }
}

impl Timed for SweepRow {
    fn clear_timing(&mut self) {
        self.wall_time_s = None;
    }
}

impl Timed for BiasRow {
    fn clear_timing(&mut self) {}
}

impl Timed for CompareRow {
    fn clear_timing(&mut self) {}
}

impl<R: Timed> Timed for StudyRecord<R> {
    fn clear_timing(&mut self) {
        self.rows.iter_mut().for_each(Timed::clear_timing);
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::config("run.levels", "need at least one level"));
    }
    if levels.iter().any(|b| !b.is_finite()) {
        return Err(Error::config("run.levels", "levels must be finite"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("run.levels", "levels must be strictly increasing"));
    }
    Ok(())
}

/// Crude Monte Carlo on the discrete target the method estimates at `b`.
pub fn naive_counterpart(model: &FieldModel, method: &Method, b: f64, n: usize, seeds: &SeedSequence, options: &RunOptions) -> Result<EstimatorResult> {
    let options = RunOptions {
        keep_samples: false,
        ..*options
    };
    match method {
        Method::Naive { points } | Method::Finite { points } => naive_mc(model, points, b, n, seeds, &options),
        Method::Holder { epsilon, overrides } => {
            let p = param_select(b, *epsilon, model, overrides)?;
            naive_mc_uniform(model, p.m, b - p.a / b, n, seeds, &options)
        }
        Method::Smooth { epsilon, settings } => {
            let theta = settings.theta.unwrap_or(epsilon / b);
            let grid = regular_grid(&model.domain, theta)?;
            naive_mc(model, &grid, b, n, seeds, &options)
        }
    }
}

/// Runs the estimator at each level and records efficiency diagnostics.
pub fn efficiency_sweep(spec: &SweepSpec) -> Result<StudyRecord<SweepRow>> {
    check_levels(&spec.levels)?;
    if spec.n == 0 {
        return Err(Error::config("run.n", "must be at least 1"));
    }
    if spec.batches > 0 && spec.batches % 2 == 0 {
        return Err(Error::config("run.batches", "must be odd"));
    }
    let root = SeedSequence::new(spec.seed).derive_tag("sweep");
    let options = RunOptions {
        keep_samples: true,
        ..spec.options
    };
    let mut rows = Vec::with_capacity(spec.levels.len());
    for (k, &b) in spec.levels.iter().enumerate() {
        let seeds = root.derive(k as u64);
        let result = spec.method.estimate(&spec.model, b, spec.n, &seeds, &options)?;
        let samples = result.samples.as_deref().unwrap_or(&[]);
        let boot = seeds.derive_tag("bootstrap");
        let positive = result.estimate > 0.0;
        let cv_se = positive.then(|| bootstrap_se(samples, BOOTSTRAP_RESAMPLES, &boot, |m| m.cv().unwrap_or(f64::NAN)));
        let variance_ratio_se = positive.then(|| {
            bootstrap_se(samples, BOOTSTRAP_RESAMPLES, &boot, |m| match m.cv() {
                Some(cv) => cv * cv,
                None => f64::NAN,
            })
        });
        let median = if spec.batches > 0 {
            Some(median_of_means(samples, spec.batches)?)
        } else {
            None
        };
        let naive = match spec.n_naive {
            Some(n) => Some(naive_counterpart(&spec.model, &spec.method, b, n, &seeds.derive_tag("oracle"), &spec.options)?),
            None => None,
        };
        rows.push(SweepRow {
            b,
            estimate: result.estimate,
            std_error: result.std_error,
            cv: result.cv,
            cv_se,
            m: result.m,
            a: result.a,
            gamma: result.gamma,
            theta: result.theta,
            variance_ratio: result.relative_variance,
            variance_ratio_se,
            second_moment_ratio: result.second_moment_ratio,
            median_of_means: median,
            m_capped: result.m_capped,
            naive_estimate: naive.as_ref().map(|r| r.estimate),
            naive_std_error: naive.as_ref().map(|r| r.std_error),
            wall_time_s: result.wall_time_s,
        });
    }
    Ok(StudyRecord {
        study: "sweep",
        seed: spec.seed,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasRow {
    /// `refined` for the `ε/b` lattices, `under-resolved` for the coarse arm.
    pub regime: &'static str,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    /// Largest per-axis lattice pitch.
    pub pitch: f64,
    /// Crude estimate of `P(max over this grid > b)` from the shared paths.
    pub estimate: f64,
    pub std_error: f64,
    pub reference_estimate: f64,
    pub reference_std_error: f64,
    pub reference_theta: f64,
    pub reference_pitch: f64,
    #[serde(rename = "reference_M")]
    pub reference_m: usize,
    /// `1 − P(grid max > b) / P(reference max > b)`.
    pub relative_deficit: f64,
    pub deficit_std_error: f64,
    pub deficit_over_sqrt_epsilon: Option<f64>,
    /// Lattice importance-sampling estimate on the same grid.
    pub is_estimate: Option<f64>,
    pub is_std_error: Option<f64>,
    /// Paths where this grid crossed `b` but the reference did not.
    pub pathwise_violations: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasStudy {
    pub b: f64,
    pub n: u64,
    pub seed: u64,
    pub rows: Vec<BiasRow>,
    /// Pairs of refined grids (coarse ε, fine ε) that are nested, with the
    /// number of paths where the coarse grid crossed `b` and the fine did not.
    pub nested_pairs: Vec<NestedPair>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NestedPair {
    pub coarse_epsilon: f64,
    pub fine_epsilon: f64,
    pub violations: u64,
}

impl Timed for BiasStudy {
    fn clear_timing(&mut self) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSettings {
    /// Replicates for the lattice importance-sampling arm; 0 skips it.
    pub n_is: usize,
    /// Add a lattice with about `b^{d/2}` points.
    pub under_resolved: bool,
}

impl Default for BiasSettings {
    fn default() -> Self {
        Self {
            n_is: 0,
            under_resolved: true,
        }
    }
}

struct Arm {
    regime: &'static str,
    epsilon: Option<f64>,
    theta: Option<f64>,
    counts: Vec<usize>,
    indices: Vec<usize>,
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    a / gcd(a, b) * b
}

/// Relative deficit of `ε/b`-lattices against a nested fine reference.
///
/// Every lattice has odd per-axis counts and the reference counts are odd
/// multiples of all of them, so each lattice is a subset of the reference
/// and its maximum never exceeds the reference maximum on any path. All
/// lattices are evaluated on the same `n` reference paths.
pub fn bias_study(model: &FieldModel, b: f64, epsilons: &[f64], n: usize, seed: u64, settings: &BiasSettings, options: &RunOptions) -> Result<BiasStudy> {
    if epsilons.is_empty() {
        return Err(Error::config("run.epsilons", "need at least one value"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::config("run.epsilons", "values must lie in (0, 1]"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::config("run.b", format!("must be positive, got {b}")));
    }
    if n < 2 {
        return Err(Error::config("run.n", "need at least two paths"));
    }
    let domain = &model.domain;
    let d = domain.dimension();
    let mut arms = Vec::new();
    for &eps in epsilons {
        let theta = eps / b;
        arms.push(Arm {
            regime: "refined",
            epsilon: Some(eps),
            theta: Some(theta),
            counts: odd_lattice_counts(domain, theta)?,
            indices: Vec::new(),
        });
    }
    let eps_min = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let reference_theta = eps_min / (4.0 * b);
    // Reference: odd multiples of the lcm until the pitch covers at θ_ref.
    let mut reference_counts = vec![1usize; d];
    for arm in &arms {
        for (r, c) in reference_counts.iter_mut().zip(&arm.counts) {
            *r = lcm(*r, *c);
        }
    }
    for (k, r) in reference_counts.iter_mut().enumerate() {
        let base = *r;
        let mut mult = 1;
        while domain.edge(k) / (base * mult) as f64 > 4.0 * reference_theta / d as f64 {
            mult += 2;
        }
        *r = base * mult;
    }
    if settings.under_resolved {
        // Largest odd divisor of the reference count not above b^{1/2}.
        let target = b.sqrt();
        let counts = reference_counts
            .iter()
            .map(|&r| (1..=r).filter(|c| r % c == 0 && (r / c) % 2 == 1 && *c as f64 <= target).max().unwrap_or(1))
            .collect();
        arms.push(Arm {
            regime: "under-resolved",
            epsilon: None,
            theta: None,
            counts,
            indices: Vec::new(),
        });
    }
    for arm in &mut arms {
        arm.indices = nested_indices(&reference_counts, &arm.counts)?;
    }
    let reference = lattice(domain, &reference_counts, reference_theta)?;
    let cov = assemble_cov(model, &reference)?;
    let factor = cholesky(&cov, options.jitter)?;
    let means: Vec<f64> = reference.iter().map(|t| model.mean.eval(t)).collect();
    let m_ref = reference.len();

    // Nested pairs among refined arms, by per-axis divisibility with odd ratio.
    let refined: Vec<usize> = (0..arms.len()).filter(|&i| arms[i].regime == "refined").collect();
    let mut pairs = Vec::new();
    for &i in &refined {
        for &j in &refined {
            let (ci, cj) = (&arms[i].counts, &arms[j].counts);
            let nested = ci != cj && ci.iter().zip(cj).all(|(a, f)| f % a == 0 && (f / a) % 2 == 1);
            if nested {
                pairs.push((i, j));
            }
        }
    }

    let seeds = SeedSequence::new(seed).derive_tag("bias");
    struct Tally {
        reference: Moments,
        /// (1(grid misses while reference crosses), 1(reference crosses))
        deficit: Vec<PairMoments>,
        crosses: Vec<Moments>,
        violations: Vec<u64>,
        pair_violations: Vec<u64>,
    }
    let blocks = run_blocks(n, |range| {
        let mut t = Tally {
            reference: Moments::default(),
            deficit: vec![PairMoments::default(); arms.len()],
            crosses: vec![Moments::default(); arms.len()],
            violations: vec![0; arms.len()],
            pair_violations: vec![0; pairs.len()],
        };
        let mut z = vec![0.0; m_ref];
        let mut x = vec![0.0; m_ref];
        let mut crossed = vec![false; arms.len()];
        for k in range {
            let mut rng = seeds.stream(k);
            for slot in z.iter_mut() {
                *slot = rng.sample(StandardNormal);
            }
            factor.transform_into(&means, &z, &mut x);
            let ref_cross = x.iter().any(|&v| v > b);
            t.reference.push(f64::from(u8::from(ref_cross)));
            for (a, arm) in arms.iter().enumerate() {
                let c = arm.indices.iter().any(|&i| x[i] > b);
                crossed[a] = c;
                t.crosses[a].push(f64::from(u8::from(c)));
                if c && !ref_cross {
                    t.violations[a] += 1;
                }
                t.deficit[a].push(f64::from(u8::from(ref_cross && !c)), f64::from(u8::from(ref_cross)));
            }
            for (p, &(i, j)) in pairs.iter().enumerate() {
                if crossed[i] && !crossed[j] {
                    t.pair_violations[p] += 1;
                }
            }
        }
        Ok(t)
    })?;
    let mut reference_m = Moments::default();
    let mut deficit = vec![PairMoments::default(); arms.len()];
    let mut crosses = vec![Moments::default(); arms.len()];
    let mut violations = vec![0u64; arms.len()];
    let mut pair_violations = vec![0u64; pairs.len()];
    for t in &blocks {
        reference_m.merge(&t.reference);
        for a in 0..arms.len() {
            deficit[a].merge(&t.deficit[a]);
            crosses[a].merge(&t.crosses[a]);
            violations[a] += t.violations[a];
        }
        for p in 0..pairs.len() {
            pair_violations[p] += t.pair_violations[p];
        }
    }
    let reference_pitch = (0..d).map(|k| domain.edge(k) / reference_counts[k] as f64).fold(0.0, f64::max);

    let mut rows = Vec::with_capacity(arms.len());
    for (a, arm) in arms.iter().enumerate() {
        let (relative_deficit, deficit_std_error) = deficit[a].ratio()?;
        let pitch = (0..d).map(|k| domain.edge(k) / arm.counts[k] as f64).fold(0.0, f64::max);
        let is = match (arm.epsilon, settings.n_is) {
            (Some(eps), n_is) if n_is > 0 => {
                let grid = lattice(domain, &arm.counts, eps / b)?;
                let sampler = SmoothSampler::new(model, &grid, b, options.jitter)?;
                let is_options = RunOptions {
                    keep_samples: false,
                    ..*options
                };
                Some(simulate(&sampler, n_is, &seeds.derive_tag("is").derive(a as u64), &is_options)?)
            }
            _ => None,
        };
        rows.push(BiasRow {
            regime: arm.regime,
            epsilon: arm.epsilon,
            theta: arm.theta,
            m: arm.indices.len(),
            pitch,
            estimate: crosses[a].mean,
            std_error: crosses[a].std_error(),
            reference_estimate: reference_m.mean,
            reference_std_error: reference_m.std_error(),
            reference_theta,
            reference_pitch,
            reference_m: m_ref,
            relative_deficit,
            deficit_std_error,
            deficit_over_sqrt_epsilon: arm.epsilon.map(|e| relative_deficit / e.sqrt()),
            is_estimate: is.as_ref().map(|r| r.estimate),
            is_std_error: is.as_ref().map(|r| r.std_error),
            pathwise_violations: violations[a],
        });
    }
    let nested_pairs = pairs
        .iter()
        .zip(&pair_violations)
        .map(|(&(i, j), &v)| NestedPair {
            coarse_epsilon: arms[i].epsilon.unwrap_or(f64::NAN),
            fine_epsilon: arms[j].epsilon.unwrap_or(f64::NAN),
            violations: v,
        })
        .collect();
    Ok(BiasStudy {
        b,
        n: n as u64,
        seed,
        rows,
        nested_pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub b: f64,
    pub is_estimate: f64,
    pub is_se: f64,
    pub naive_estimate: f64,
    pub naive_se: f64,
    /// `(is − naive) / √(is_se² + naive_se²)`.
    pub z: Option<f64>,
    /// Per-replicate variance ratio naive / IS: how many more crude
    /// replicates give the same standard error.
    pub efficiency_multiplier: Option<f64>,
}

/// Importance sampling against crude Monte Carlo on the same discrete target.
pub fn oracle_compare(
    model: &FieldModel,
    method: &Method,
    levels: &[f64],
    n_is: usize,
    n_naive: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<StudyRecord<CompareRow>> {
    check_levels(levels)?;
    if matches!(method, Method::Naive { .. }) {
        return Err(Error::config("run.algorithm", "compare needs an importance-sampling algorithm"));
    }
    if n_is == 0 || n_naive == 0 {
        return Err(Error::config("run.n", "replicate counts must be at least 1"));
    }
    let root = SeedSequence::new(seed).derive_tag("compare");
    let options = RunOptions {
        keep_samples: false,
        ..*options
    };
    let mut rows = Vec::with_capacity(levels.len());
    for (k, &b) in levels.iter().enumerate() {
        let seeds = root.derive(k as u64);
        let is = method.estimate(model, b, n_is, &seeds, &options)?;
        let naive = naive_counterpart(model, method, b, n_naive, &seeds.derive_tag("oracle"), &options)?;
        let combined = (is.std_error.powi(2) + naive.std_error.powi(2)).sqrt();
        let z = (combined > 0.0).then(|| (is.estimate - naive.estimate) / combined);
        let var_is = is.std_error.powi(2) * is.n as f64;
        let var_naive = naive.std_error.powi(2) * naive.n as f64;
        rows.push(CompareRow {
            b,
            is_estimate: is.estimate,
            is_se: is.std_error,
            naive_estimate: naive.estimate,
            naive_se: naive.std_error,
            z,
            efficiency_multiplier: (var_is > 0.0).then(|| var_naive / var_is),
        });
    }
    Ok(StudyRecord {
        study: "compare",
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::PointSet;
    use crate::field::{CovarianceKernel, Domain};

    fn single_point() -> (FieldModel, PointSet) {
        let model = FieldModel::centered(
            Domain::unit(1).unwrap(),
            CovarianceKernel::Exponential { lengthscale: 1.0, variance: 1.0 },
        )
        .unwrap();
        (model, PointSet::from_points(&[vec![0.5]]).unwrap())
    }

    #[test]
    fn one_point_sweep_has_zero_cv() {
        let (model, points) = single_point();
        let spec = SweepSpec {
            model,
            method: Method::Finite { points },
            levels: vec![2.0, 3.0, 4.0],
            n: 500,
            seed: 1,
            batches: 5,
            n_naive: None,
            options: RunOptions::default(),
        };
        let rec = efficiency_sweep(&spec).unwrap();
        assert_eq!(rec.rows.len(), 3);
        for row in &rec.rows {
            assert_eq!(row.cv, Some(0.0));
            assert_eq!(row.median_of_means, Some(row.estimate));
        }
    }

    #[test]
    fn levels_must_increase() {
        let (model, points) = single_point();
        let spec = SweepSpec {
            model,
            method: Method::Finite { points },
            levels: vec![3.0, 2.0],
            n: 10,
            seed: 1,
            batches: 0,
            n_naive: None,
            options: RunOptions::default(),
        };
        assert_eq!(efficiency_sweep(&spec).unwrap_err().category(), "config");
    }

    #[test]
    fn gain_grows_with_rarity() {
        let model = FieldModel::centered(
            Domain::unit(1).unwrap(),
            CovarianceKernel::Exponential { lengthscale: 1.0, variance: 1.0 },
        )
        .unwrap();
        let points = PointSet::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        let rec = oracle_compare(&model, &Method::Finite { points }, &[0.5, 3.0], 20_000, 200_000, 7, &RunOptions::default()).unwrap();
        for row in &rec.rows {
            assert!(row.z.unwrap().abs() < 4.0);
        }
        let common = rec.rows[0].efficiency_multiplier.unwrap();
        let rare = rec.rows[1].efficiency_multiplier.unwrap();
        assert!(common < 20.0, "multiplier {common}");
        assert!(rare > 10.0 * common, "{rare} vs {common}");
    }

    #[test]
    fn small_bias_study_is_pathwise_monotone() {
        let model = FieldModel::centered(
            Domain::unit(1).unwrap(),
            CovarianceKernel::SquaredExponential { lengthscale: 0.5, variance: 1.0 },
        )
        .unwrap();
        let study = bias_study(&model, 2.0, &[0.4, 0.2], 20_000, 3, &BiasSettings::default(), &RunOptions::default()).unwrap();
        assert_eq!(study.rows.len(), 3);
        for row in &study.rows {
            assert_eq!(row.pathwise_violations, 0);
            assert!(row.relative_deficit >= 0.0);
            assert!(row.estimate <= row.reference_estimate);
        }
        assert_eq!(study.rows[2].regime, "under-resolved");
        assert!(study.rows[0].reference_pitch <= 4.0 * study.rows[0].reference_theta);
    }
}
