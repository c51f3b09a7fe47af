use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::discretization::PointSet;
use crate::error::{Error, Result};
use crate::field::FieldModel;

/// Covariance matrix of the field at an ordered point set.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    entries: DMatrix<f64>,
}

impl CovMatrix {
    /// Wraps a symmetric matrix with positive diagonal.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 || entries.ncols() != m {
            return Err(Error::Argument(format!(
                "covariance must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..m {
            if !(entries[(i, i)] > 0.0) {
                return Err(Error::Argument(format!("covariance diagonal entry {i} is not positive")));
            }
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Argument(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Argument("covariance rows must form a square matrix".into()));
        }
        Self::from_matrix(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.order()).map(|i| self.entries[(i, i)]).fold(0.0, f64::max)
    }
}

/// Fills `C(p_i, p_j)` over a point set. Symmetric by construction.
pub fn assemble_cov(model: &FieldModel, points: &PointSet) -> Result<CovMatrix> {
    let m = points.len();
    if m == 0 {
        return Err(Error::Argument("cannot assemble a covariance on an empty point set".into()));
    }
    for p in points.iter() {
        model.domain.check(p)?;
    }
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        entries[(i, i)] = model.kernel.between(points.point(i), points.point(i));
        for j in 0..i {
            let c = model.kernel.between(points.point(i), points.point(j));
            entries[(i, j)] = c;
            entries[(j, i)] = c;
        }
    }
    Ok(CovMatrix { entries })
}

/// Geometric jitter schedule `{0, s·initial, s·initial·growth, …}` with
/// `s` the largest diagonal entry of the matrix being factored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub initial: f64,
    pub growth: f64,
    pub max_tries: u32,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-10,
            growth: 10.0,
            max_tries: 6,
        }
    }
}

/// Lower-triangular `L` with `L Lᵀ = Σ + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter
    }

    /// Writes `mean + L z` into `out`.
    pub fn transform_into(&self, mean: &[f64], z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(mean);
        self.add_product(z, out);
    }

    /// `out += L z`.
    pub fn add_product(&self, z: &[f64], out: &mut [f64]) {
        let m = self.order();
        debug_assert!(z.len() == m && out.len() == m);
        for (j, zj) in z.iter().enumerate() {
            let col = self.lower.column(j);
            for i in j..m {
                out[i] += col[i] * zj;
            }
        }
    }

    /// `max |L Lᵀ − target|`.
    pub fn reconstruction_error(&self, target: &DMatrix<f64>) -> f64 {
        let rebuilt = &self.lower * self.lower.transpose();
        (rebuilt - target).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn cholesky(cov: &CovMatrix, policy: JitterPolicy) -> Result<CholeskyFactor> {
    cholesky_matrix(cov.matrix(), policy)
}

pub(crate) fn cholesky_matrix(matrix: &DMatrix<f64>, policy: JitterPolicy) -> Result<CholeskyFactor> {
    let scale = (0..matrix.nrows()).map(|i| matrix[(i, i)]).fold(0.0, f64::max);
    cholesky_scaled(matrix, policy, scale)
}

/// Jitter steps are multiples of `scale` rather than of the matrix's own
/// diagonal, which may vanish (Schur complements at duplicated points).
pub(crate) fn cholesky_scaled(matrix: &DMatrix<f64>, policy: JitterPolicy, scale: f64) -> Result<CholeskyFactor> {
    let m = matrix.nrows();
    if m == 0 {
        return Ok(CholeskyFactor {
            lower: DMatrix::zeros(0, 0),
            jitter: 0.0,
        });
    }
    let mut jitter = 0.0;
    let mut step = policy.initial * scale;
    for attempt in 0..=policy.max_tries {
        let mut trial = matrix.clone();
        if attempt > 0 {
            jitter = step;
            step *= policy.growth;
            for i in 0..m {
                trial[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(trial) {
            let lower = chol.unpack();
            if (0..m).all(|i| lower[(i, i)] > 0.0 && lower[(i, i)].is_finite()) {
                return Ok(CholeskyFactor { lower, jitter });
            }
        }
    }
    Err(Error::NearSingular { order: m, jitter })
}

/// Draws `mean + L z` with `z` i.i.d. standard normal.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &[f64], factor: &CholeskyFactor, rng: &mut R) -> Result<Vec<f64>> {
    if mean.len() != factor.order() {
        return Err(Error::Argument(format!(
            "mean has length {} but factor has order {}",
            mean.len(),
            factor.order()
        )));
    }
    let z: Vec<f64> = (0..mean.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = vec![0.0; mean.len()];
    factor.transform_into(mean, &z, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CovarianceKernel, Domain};
    use crate::rng::SeedSequence;

    fn mat(rows: &[&[f64]]) -> CovMatrix {
        CovMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn assemble_single_and_pair() {
        let k = CovarianceKernel::Exponential { lengthscale: 1.0, variance: 1.0 };
        let model = FieldModel::centered(Domain::unit(1).unwrap(), k).unwrap();
        let one = PointSet::explicit(1, vec![0.3]).unwrap();
        assert_eq!(assemble_cov(&model, &one).unwrap().get(0, 0), 1.0);

        let pair = PointSet::explicit(1, vec![0.0, 1.0]).unwrap();
        let c = assemble_cov(&model, &pair).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(c.get(0, 0), 1.0);
        assert!((c.get(0, 1) - e).abs() < 1e-16);
        assert_eq!(c.get(0, 1), c.get(1, 0));

        let dup = PointSet::explicit(1, vec![0.5, 0.5]).unwrap();
        let c = assemble_cov(&model, &dup).unwrap();
        assert!(c.matrix().iter().all(|v| *v == 1.0));

        let outside = PointSet::explicit(1, vec![1.5]).unwrap();
        assert!(assemble_cov(&model, &outside).is_err());
    }

    #[test]
    fn identity_and_closed_form_factors() {
        let f = cholesky(&mat(&[&[1.0, 0.0], &[0.0, 1.0]]), JitterPolicy::default()).unwrap();
        assert_eq!(f.jitter_applied(), 0.0);
        assert_eq!(f.lower(), &DMatrix::identity(2, 2));

        let f = cholesky(&mat(&[&[1.0, 0.5], &[0.5, 1.0]]), JitterPolicy::default()).unwrap();
        assert_eq!(f.jitter_applied(), 0.0);
        let l = f.lower();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((l[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((l[(1, 1)] - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn rank_deficient_needs_jitter() {
        let ones = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let f = cholesky(&ones, JitterPolicy::default()).unwrap();
        assert!(f.jitter_applied() > 0.0);
        let target = ones.matrix() + DMatrix::identity(2, 2) * f.jitter_applied();
        assert!(f.reconstruction_error(&target) <= 1e-10 * ones.max_abs());

        let strict = JitterPolicy { max_tries: 0, ..JitterPolicy::default() };
        assert!(matches!(cholesky(&ones, strict), Err(Error::NearSingular { order: 2, .. })));
    }

    #[test]
    fn reconstruction_on_kernel_matrices() {
        let k = CovarianceKernel::SquaredExponential { lengthscale: 0.5, variance: 1.0 };
        let model = FieldModel::centered(Domain::unit(1).unwrap(), k).unwrap();
        for m in [2usize, 8, 32, 105] {
            let pts = PointSet::explicit(1, (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect()).unwrap();
            let cov = assemble_cov(&model, &pts).unwrap();
            let f = cholesky(&cov, JitterPolicy::default()).unwrap();
            let target = cov.matrix() + DMatrix::identity(m, m) * f.jitter_applied();
            assert!(f.reconstruction_error(&target) <= 1e-10 * cov.max_abs(), "m = {m}");
        }
    }

    #[test]
    fn sample_variance_converges() {
        let f = cholesky(&mat(&[&[1.0]]), JitterPolicy::default()).unwrap();
        let mut rng = SeedSequence::new(1).stream(0);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_mvn(&[0.0], &f, &mut rng).unwrap()[0];
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((0.99..=1.01).contains(&var), "var = {var}");
    }

    #[test]
    fn sampling_is_deterministic_and_affine() {
        let f = cholesky(&mat(&[&[2.0, 0.3], &[0.3, 1.0]]), JitterPolicy::default()).unwrap();
        let seq = SeedSequence::new(9);
        let a = sample_mvn(&[0.0, 0.0], &f, &mut seq.stream(4)).unwrap();
        let b = sample_mvn(&[0.0, 0.0], &f, &mut seq.stream(4)).unwrap();
        assert_eq!(a, b);
        let shifted = sample_mvn(&[1.5, -2.0], &f, &mut seq.stream(4)).unwrap();
        // equal up to the rounding of one addition
        assert!((shifted[0] - a[0] - 1.5).abs() <= 4.0 * f64::EPSILON * (1.5 + a[0].abs()));
        assert!((shifted[1] - a[1] + 2.0).abs() <= 4.0 * f64::EPSILON * (2.0 + a[1].abs()));
        assert!(sample_mvn(&[0.0], &f, &mut seq.stream(0)).is_err());
    }
}
