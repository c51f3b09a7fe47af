//! Streaming moments, deterministic parallel replication, bootstrap and the
//! median trick.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeedSequence;

/// Replicates per work unit. Block boundaries depend only on `n`, so the
/// order of floating-point reductions is the same for any thread count.
pub const BLOCK: usize = 1024;

/// Runs `work` over consecutive replicate ranges in parallel and returns the
/// block results in replicate order.
pub fn run_blocks<T, F>(n: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = (b * BLOCK) as u64;
            let end = ((b + 1) * BLOCK).min(n) as u64;
            work(start..end)
        })
        .collect()
}

/// Count, mean and centered sum of squares (Welford), mergeable with Chan's
/// update. A constant stream has `m2 == 0` exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let wa = self.count as f64;
        let wb = other.count as f64;
        self.mean += delta * (wb / n as f64);
        self.m2 += other.m2 + delta * delta * wa * wb / n as f64;
        self.count = n;
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// Empirical `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64 + self.mean * self.mean
        }
    }

    /// `std_dev / mean`, undefined when the mean is not positive.
    pub fn cv(&self) -> Option<f64> {
        (self.mean > 0.0).then(|| self.std_dev() / self.mean)
    }
}

/// Joint moments of a pair `(y, x)`, used by the ratio estimator `ȳ / x̄`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairMoments {
    pub count: u64,
    pub mean_y: f64,
    pub mean_x: f64,
    pub m2_y: f64,
    pub m2_x: f64,
    pub c_xy: f64,
}

impl PairMoments {
    pub fn push(&mut self, y: f64, x: f64) {
        self.count += 1;
        let n = self.count as f64;
        let dy = y - self.mean_y;
        let dx = x - self.mean_x;
        self.mean_y += dy / n;
        self.mean_x += dx / n;
        self.m2_y += dy * (y - self.mean_y);
        self.m2_x += dx * (x - self.mean_x);
        self.c_xy += dy * (x - self.mean_x);
    }

    pub fn merge(&mut self, other: &PairMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let dy = other.mean_y - self.mean_y;
        let dx = other.mean_x - self.mean_x;
        self.mean_y += dy * nb / n;
        self.mean_x += dx * nb / n;
        self.m2_y += other.m2_y + dy * dy * na * nb / n;
        self.m2_x += other.m2_x + dx * dx * na * nb / n;
        self.c_xy += other.c_xy + dy * dx * na * nb / n;
        self.count += other.count;
    }

    /// `ȳ / x̄` with its delta-method standard error.
    pub fn ratio(&self) -> Result<(f64, f64)> {
        if !(self.mean_x > 0.0) {
            return Err(Error::DegenerateRatio { denominator: self.mean_x });
        }
        let r = self.mean_y / self.mean_x;
        if self.count < 2 {
            return Ok((r, 0.0));
        }
        let df = (self.count - 1) as f64;
        let (vy, vx, cxy) = (self.m2_y / df, self.m2_x / df, self.c_xy / df);
        let var = (vy - 2.0 * r * cxy + r * r * vx).max(0.0) / (self.mean_x * self.mean_x * self.count as f64);
        Ok((r, var.sqrt()))
    }
}

/// Bootstrap standard error of `statistic` over `resamples` resamples drawn
/// with replacement. Resample `r` uses stream `r` of `seeds`.
pub fn bootstrap_se<F>(samples: &[f64], resamples: usize, seeds: &SeedSequence, statistic: F) -> f64
where
    F: Fn(&Moments) -> f64 + Sync,
{
    if samples.is_empty() || resamples < 2 {
        return 0.0;
    }
    let n = samples.len();
    let stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeds.stream(r as u64);
            let mut m = Moments::default();
            for _ in 0..n {
                m.push(samples[rng.random_range(0..n)]);
            }
            statistic(&m)
        })
        .collect();
    Moments::from_slice(&stats).std_dev()
}

/// Median of an odd number of batch means.
pub fn median_trick(batch_means: &[f64]) -> Result<f64> {
    if batch_means.is_empty() {
        return Err(Error::Argument("median trick needs at least one batch".into()));
    }
    if batch_means.len() % 2 == 0 {
        return Err(Error::Argument(format!(
            "median trick needs an odd number of batches, got {}",
            batch_means.len()
        )));
    }
    if batch_means.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("batch means must not be NaN".into()));
    }
    let mut sorted = batch_means.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[sorted.len() / 2])
}

/// Splits replicates into `batches` contiguous groups of near-equal size and
/// returns the median of the group means.
pub fn median_of_means(samples: &[f64], batches: usize) -> Result<f64> {
    if batches == 0 || batches > samples.len() {
        return Err(Error::Argument(format!(
            "cannot split {} replicates into {batches} batches",
            samples.len()
        )));
    }
    let n = samples.len();
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let lo = b * n / batches;
            let hi = (b + 1) * n / batches;
            Moments::from_slice(&samples[lo..hi]).mean
        })
        .collect();
    median_trick(&means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_stream_has_zero_variance() {
        let mut m = Moments::default();
        for _ in 0..10_000 {
            m.push(0.001_349_898_031_630_094_5);
        }
        let mut other = Moments::default();
        other.push(0.001_349_898_031_630_094_5);
        m.merge(&other);
        assert_eq!(m.variance(), 0.0);
        assert_eq!(m.mean, 0.001_349_898_031_630_094_5);
        assert_eq!(m.cv(), Some(0.0));
    }

    #[test]
    fn median_trick_examples() {
        assert_eq!(median_trick(&[4.2]).unwrap(), 4.2);
        assert_eq!(median_trick(&[1.0, 2.0, 100.0]).unwrap(), 2.0);
        assert!(median_trick(&[]).is_err());
        assert!(median_trick(&[1.0, 2.0]).is_err());
        assert_eq!(median_of_means(&[1.0, 1.0, 5.0, 5.0, 2.0, 2.0], 3).unwrap(), 2.0);
    }

    #[test]
    fn ratio_of_constant_functional_is_one() {
        let mut p = PairMoments::default();
        for x in [0.1, 0.5, 0.02, 3.0] {
            p.push(x, x);
        }
        let (r, se) = p.ratio().unwrap();
        assert_eq!(r, 1.0);
        assert!(se < 1e-12);
        assert!(PairMoments::default().ratio().is_err());
    }

    #[test]
    fn blocks_come_back_in_order() {
        let out = run_blocks(3 * BLOCK + 5, |r| Ok((r.start, r.end))).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[3], ((3 * BLOCK) as u64, (3 * BLOCK + 5) as u64));
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-10.0f64..10.0, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let whole = Moments::from_slice(&xs);
            let mut a = Moments::from_slice(&xs[..split]);
            a.merge(&Moments::from_slice(&xs[split..]));
            prop_assert_eq!(a.count, whole.count);
            prop_assert!((a.mean - whole.mean).abs() < 1e-12);
            prop_assert!((a.m2 - whole.m2).abs() < 1e-9 * (1.0 + whole.m2));

            let mut p = PairMoments::default();
            let mut q = PairMoments::default();
            for (k, &x) in xs.iter().enumerate() {
                let y = 0.5 * x + 1.0;
                if k < split { p.push(y, x) } else { q.push(y, x) }
            }
            let mut all = PairMoments::default();
            for &x in &xs { all.push(0.5 * x + 1.0, x); }
            p.merge(&q);
            prop_assert!((p.c_xy - all.c_xy).abs() < 1e-9 * (1.0 + all.c_xy.abs()));
        }
    }
}
