use std::sync::Arc;

use excursion::discretization::{regular_grid, PointSet};
use excursion::estimators::{
    conditional_expectation, median_trick, naive_mc, run_algorithm_1, FiniteSampler, Functional, Method, PathFunctional, PathView, ReplicateSampler, RunOptions, SmoothSampler,
};
use excursion::field::{CovarianceKernel, Domain, FieldModel};
use excursion::gaussian::{normal_tail, JitterPolicy};
use excursion::rng::SeedSequence;
use excursion::stats::median_of_means;
use proptest::prelude::*;

// 1 − Φ(1)², from a 50-digit evaluation.
const EITHER_OF_TWO_AT_1: f64 = 0.292_139_018_262_858_984_66;
// P(max(X1, X2) > 3) for a standard bivariate normal with ρ = 1/2.
const BIVARIATE_HALF_AT_3: f64 = 0.002_617_906_401_427_996_941_1;

fn line(kernel: CovarianceKernel) -> FieldModel {
    FieldModel::centered(Domain::unit(1).unwrap(), kernel).unwrap()
}

fn exponential(lengthscale: f64) -> FieldModel {
    line(CovarianceKernel::Exponential { lengthscale, variance: 1.0 })
}

fn points(xs: &[f64]) -> PointSet {
    PointSet::from_points(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
}

fn within(estimate: f64, se: f64, truth: f64) -> bool {
    (estimate - truth).abs() <= 4.0 * se
}

#[test]
fn naive_sure_event() {
    let r = naive_mc(&exponential(1.0), &points(&[0.0, 1.0]), -1e9, 1000, &SeedSequence::new(1), &RunOptions::default()).unwrap();
    assert_eq!(r.estimate, 1.0);
    assert_eq!(r.std_error, 0.0);
}

#[test]
fn naive_symmetry() {
    let r = naive_mc(&exponential(1.0), &points(&[0.5]), 0.0, 1_000_000, &SeedSequence::new(2), &RunOptions::default()).unwrap();
    assert!(within(r.estimate, r.std_error, 0.5), "{}", r.estimate);
}

#[test]
fn naive_independent_pair() {
    let r = naive_mc(&exponential(0.01), &points(&[0.0, 1.0]), 1.0, 400_000, &SeedSequence::new(3), &RunOptions::default()).unwrap();
    assert!(within(r.estimate, r.std_error, EITHER_OF_TWO_AT_1), "{}", r.estimate);
}

#[test]
fn mixture_is_uniform_for_iid_coordinates() {
    let s = FiniteSampler::new(&exponential(0.001), &points(&[0.0, 0.5, 1.0]), 2.0, JitterPolicy::default()).unwrap();
    let seeds = SeedSequence::new(4);
    let n = 60_000;
    let mut counts = [0usize; 3];
    for k in 0..n {
        counts[s.replicate(&mut seeds.stream(k)).unwrap().selected_index] += 1;
    }
    let se = (1.0 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
    for c in counts {
        assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 4.0 * se, "{counts:?}");
    }
}

#[test]
fn finite_matches_bivariate_closed_form() {
    let model = exponential(1.0 / std::f64::consts::LN_2);
    let r = run_algorithm_1(&model, &points(&[0.0, 1.0]), 3.0, 1_000_000, &SeedSequence::new(5), &RunOptions::default()).unwrap();
    assert!(within(r.estimate, r.std_error, BIVARIATE_HALF_AT_3), "{} ± {}", r.estimate, r.std_error);
}

#[test]
fn finite_second_moment_is_bounded() {
    let pts = points(&[0.0, 0.2, 0.7]);
    let model = exponential(0.5);
    let r = run_algorithm_1(&model, &pts, 3.0, 50_000, &SeedSequence::new(6), &RunOptions::default()).unwrap();
    let bound = 3.0 * normal_tail(3.0);
    let second = r.second_moment_ratio.unwrap() * r.estimate * r.estimate;
    assert!(second <= bound * bound * (1.0 + 1e-12));
}

#[test]
fn lattice_estimator_matches_naive_on_same_grid() {
    let model = line(CovarianceKernel::SquaredExponential { lengthscale: 0.5, variance: 1.0 });
    let grid = regular_grid(&model.domain, 0.25 / 3.0).unwrap();
    let sampler = SmoothSampler::new(&model, &grid, 3.0, JitterPolicy::default()).unwrap();
    let seeds = SeedSequence::new(7);
    let is = excursion::estimators::simulate(&sampler, 200_000, &seeds, &RunOptions::default()).unwrap();
    let naive = naive_mc(&model, &grid, 3.0, 2_000_000, &seeds, &RunOptions::default()).unwrap();
    let combined = (is.std_error.powi(2) + naive.std_error.powi(2)).sqrt();
    assert!((is.estimate - naive.estimate).abs() <= 4.0 * combined, "{} vs {}", is.estimate, naive.estimate);
}

#[test]
fn results_are_reproducible_from_the_seed() {
    let model = exponential(1.0);
    let pts = points(&[0.0, 0.4, 1.0]);
    let run = |seed| run_algorithm_1(&model, &pts, 3.0, 5000, &SeedSequence::new(seed), &RunOptions::default()).unwrap();
    let (a, b, c) = (run(9), run(9), run(10));
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    assert_ne!(a.estimate, c.estimate);
}

struct SelectedAboveNext(f64);

impl PathFunctional for SelectedAboveNext {
    fn evaluate(&self, p: &PathView<'_>) -> f64 {
        f64::from(u8::from(p.values[p.selected_index] > self.0))
    }
    fn upper_bound(&self) -> f64 {
        1.0
    }
}

#[test]
fn ratio_functionals() {
    let model = exponential(1.0);
    let method = Method::Finite { points: points(&[0.0, 0.5, 1.0]) };
    let seeds = SeedSequence::new(11);
    let ind = conditional_expectation(&model, &method, &Functional::Custom(Arc::new(SelectedAboveNext(4.0))), 3.0, 20_000, &seeds, &RunOptions::default()).unwrap();
    assert!((0.0..=1.0).contains(&ind.estimate));
    let vol = conditional_expectation(&model, &method, &Functional::ExcursionVolume { level: 3.0 }, 3.0, 20_000, &seeds, &RunOptions::default()).unwrap();
    // At least one of three points is above b, so the fraction is ≥ 1/3.
    assert!(vol.estimate >= 1.0 / 3.0 && vol.estimate <= 1.0);
}

#[test]
fn median_trick_examples() {
    assert_eq!(median_trick(&[0.25]).unwrap(), 0.25);
    assert_eq!(median_trick(&[1.0, 2.0, 100.0]).unwrap(), 2.0);
    assert!(median_trick(&[]).is_err());
}

#[test]
fn median_of_means_concentrates() {
    let model = exponential(0.01);
    let opts = RunOptions {
        keep_samples: true,
        ..RunOptions::default()
    };
    let r = run_algorithm_1(&model, &points(&[0.0, 1.0]), 3.0, 99_000, &SeedSequence::new(12), &opts).unwrap();
    let truth = 0.002_697_973_838_564_390_249_6;
    let samples = r.samples.unwrap();
    let mut errors = Vec::new();
    for batches in [3, 11, 33] {
        errors.push((median_of_means(&samples, batches).unwrap() - truth).abs() / truth);
    }
    assert!(errors.iter().all(|e| *e < 1e-3), "{errors:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn finite_replicates_respect_invariants(
        xs in proptest::collection::vec(0.0f64..1.0, 1..5),
        b in 0.5f64..5.0,
        ell in 0.05f64..2.0,
        seed in any::<u64>(),
    ) {
        let model = exponential(ell);
        let pts = points(&xs);
        let s = FiniteSampler::new(&model, &pts, b, JitterPolicy::default()).unwrap();
        let bound = xs.len() as f64 * normal_tail(b);
        let seeds = SeedSequence::new(seed);
        for k in 0..50 {
            let out = s.replicate(&mut seeds.stream(k)).unwrap();
            prop_assert!(out.num_exceed_gamma >= 1);
            prop_assert!(out.field_values[out.selected_index] > b);
            prop_assert!(out.likelihood_ratio > 0.0 && out.likelihood_ratio <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lattice_replicates_respect_invariants(
        b in 1.0f64..5.0,
        eps in 0.1f64..1.0,
        seed in any::<u64>(),
    ) {
        let model = line(CovarianceKernel::Matern32 { lengthscale: 0.4, variance: 1.0 });
        let grid = regular_grid(&model.domain, (eps / b).min(1.0)).unwrap();
        let s = SmoothSampler::new(&model, &grid, b, JitterPolicy::default()).unwrap();
        let seeds = SeedSequence::new(seed);
        for k in 0..50 {
            let out = s.replicate(&mut seeds.stream(k)).unwrap();
            prop_assert!(out.num_exceed_gamma >= 1);
            prop_assert!(out.likelihood_ratio <= s.ratio_bound());
            prop_assert!(out.exceeded_b || out.likelihood_ratio == 0.0);
        }
    }
}
