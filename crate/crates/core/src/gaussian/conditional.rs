use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::cholesky::{cholesky_scaled, CholeskyFactor, CovMatrix, JitterPolicy};
use crate::error::{Error, Result};

/// Law of `X_{-i}` given `X_i = x`: Gaussian with the regression mean and the
/// Schur-complement covariance.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    pub index: usize,
    pub value: f64,
    /// Conditional mean of the remaining `M − 1` coordinates, in their
    /// original order with `index` removed.
    pub mean: Vec<f64>,
    pub factor: CholeskyFactor,
}

/// Everything about conditioning on coordinate `i` that does not depend on
/// the observed value, so it can be cached per index and reused.
#[derive(Debug, Clone)]
pub struct CoordinateConditioner {
    index: usize,
    pivot_mean: f64,
    /// Unconditional means of the other coordinates.
    other_mean: Vec<f64>,
    /// `Σ_{j,i} / Σ_{i,i}` for each other coordinate `j`.
    coef: Vec<f64>,
    factor: CholeskyFactor,
}

impl CoordinateConditioner {
    pub fn new(cov: &DMatrix<f64>, mean: &[f64], index: usize, policy: JitterPolicy) -> Result<Self> {
        let m = cov.nrows();
        if mean.len() != m {
            return Err(Error::Argument(format!("mean has length {} but covariance has order {m}", mean.len())));
        }
        if index >= m {
            return Err(Error::Argument(format!("conditioning index {index} out of range for order {m}")));
        }
        let pivot = cov[(index, index)];
        if !(pivot > 0.0) {
            return Err(Error::Argument(format!("variance at conditioning index {index} is not positive")));
        }
        let others: Vec<usize> = (0..m).filter(|&j| j != index).collect();
        let coef: Vec<f64> = others.iter().map(|&j| cov[(j, index)] / pivot).collect();
        let k = others.len();
        let schur = DMatrix::from_fn(k, k, |a, b| {
            let (ja, jb) = (others[a], others[b]);
            cov[(ja, jb)] - cov[(ja, index)] * cov[(index, jb)] / pivot
        });
        // Symmetrize the rounding of the two products.
        let schur = (&schur + schur.transpose()) * 0.5;
        let scale = (0..m).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        let factor = cholesky_scaled(&schur, policy, scale)?;
        Ok(Self {
            index,
            pivot_mean: mean[index],
            other_mean: others.iter().map(|&j| mean[j]).collect(),
            coef,
            factor,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn law_at(&self, x: f64) -> ConditionalLaw {
        let shift = x - self.pivot_mean;
        ConditionalLaw {
            index: self.index,
            value: x,
            mean: self
                .other_mean
                .iter()
                .zip(&self.coef)
                .map(|(mu, c)| mu + c * shift)
                .collect(),
            factor: self.factor.clone(),
        }
    }

    /// Fills `out` (length `M`) with `X_i = x` and a draw of the rest from
    /// the conditional law. `scratch` must hold at least `2(M − 1)` values.
    pub fn sample_into<R: Rng + ?Sized>(&self, x: f64, rng: &mut R, scratch: &mut [f64], out: &mut [f64]) {
        let k = self.other_mean.len();
        let (cond, rest) = scratch.split_at_mut(k);
        let z = &mut rest[..k];
        let shift = x - self.pivot_mean;
        for (slot, (mu, c)) in cond.iter_mut().zip(self.other_mean.iter().zip(&self.coef)) {
            *slot = mu + c * shift;
        }
        for slot in z.iter_mut() {
            *slot = rng.sample(StandardNormal);
        }
        self.factor.add_product(z, cond);
        let mut it = cond.iter();
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = if j == self.index { x } else { *it.next().expect("length") };
        }
    }
}

pub fn condition_on_coordinate(
    cov: &CovMatrix,
    mean: &[f64],
    index: usize,
    x: f64,
    policy: JitterPolicy,
) -> Result<ConditionalLaw> {
    Ok(CoordinateConditioner::new(cov.matrix(), mean, index, policy)?.law_at(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSequence;

    fn cov(rows: &[&[f64]]) -> CovMatrix {
        CovMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn bivariate_conditioning() {
        let rho = 0.6;
        let law = condition_on_coordinate(&cov(&[&[1.0, rho], &[rho, 1.0]]), &[0.0, 0.0], 0, 2.0, JitterPolicy::default())
            .unwrap();
        assert!((law.mean[0] - rho * 2.0).abs() < 1e-15);
        let var = law.factor.lower()[(0, 0)].powi(2);
        assert!((var - (1.0 - rho * rho)).abs() < 1e-15);
    }

    #[test]
    fn independence_leaves_marginal_unchanged() {
        let law = condition_on_coordinate(&cov(&[&[1.0, 0.0], &[0.0, 2.0]]), &[0.5, -1.0], 0, 3.0, JitterPolicy::default())
            .unwrap();
        assert_eq!(law.mean, vec![-1.0]);
        assert!((law.factor.lower()[(0, 0)].powi(2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn equicorrelated_schur_complement() {
        let c = cov(&[&[1.0, 0.5, 0.5], &[0.5, 1.0, 0.5], &[0.5, 0.5, 1.0]]);
        let law = condition_on_coordinate(&c, &[0.0; 3], 0, 2.0, JitterPolicy::default()).unwrap();
        assert!((law.mean[0] - 1.0).abs() < 1e-15 && (law.mean[1] - 1.0).abs() < 1e-15);
        let l = law.factor.lower();
        let s = l * l.transpose();
        let want = [[0.75, 0.25], [0.25, 0.75]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn duplicated_points_condition_with_jitter() {
        let c = cov(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let cond = CoordinateConditioner::new(c.matrix(), &[0.0, 0.0], 1, JitterPolicy::default()).unwrap();
        assert!(cond.factor().jitter_applied() > 0.0);
        assert!(CoordinateConditioner::new(c.matrix(), &[0.0, 0.0], 1, JitterPolicy { max_tries: 0, ..Default::default() })
            .is_err());
    }

    #[test]
    fn sampled_conditional_moments() {
        let c = cov(&[&[2.0, 0.8, 0.2], &[0.8, 1.0, 0.3], &[0.2, 0.3, 1.5]]);
        let mean = [1.0, -1.0, 0.5];
        let cond = CoordinateConditioner::new(c.matrix(), &mean, 1, JitterPolicy::default()).unwrap();
        let law = cond.law_at(0.0);
        let mut rng = SeedSequence::new(3).stream(0);
        let n = 200_000;
        let mut scratch = vec![0.0; 4];
        let mut out = vec![0.0; 3];
        let (mut s0, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            cond.sample_into(0.0, &mut rng, &mut scratch, &mut out);
            assert_eq!(out[1], 0.0);
            s0 += out[0];
            s2 += out[2];
        }
        // conditional means: mean_j + Σ_j1 (0 − (−1)) / 1
        assert!((law.mean[0] - 1.8).abs() < 1e-15);
        assert!((law.mean[1] - 0.8).abs() < 1e-15);
        let se0 = ((2.0 - 0.64) / n as f64).sqrt();
        let se2 = ((1.5 - 0.09) / n as f64).sqrt();
        assert!((s0 / n as f64 - 1.8).abs() < 4.0 * se0);
        assert!((s2 / n as f64 - 0.8).abs() < 4.0 * se2);
    }
}
