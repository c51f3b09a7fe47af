//! Gaussian field specifications: domain, mean and covariance kernel.
//!
//! Kernels are stationary and evaluated on the Euclidean lag `‖s − t‖₂`,
//! which keeps the squared-exponential and Matérn families positive definite
//! in every dimension. Point-set geometry (regularity, covering) lives in
//! [`crate::discretization`] and uses the L1 norm instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned hyperrectangle `∏ [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Argument("domain dimension must be positive".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::Argument(format!(
                "domain bounds have mismatched lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Argument(format!(
                    "domain axis {k} needs finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(dimension: usize) -> Result<Self> {
        Self::new(vec![0.0; dimension], vec![1.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn edge(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dimension()).map(|k| self.edge(k))
    }

    pub fn volume(&self) -> f64 {
        self.edges().product()
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        t.len() == self.dimension()
            && t
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub(crate) fn check(&self, t: &[f64]) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::DomainViolation { point: t.to_vec() })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeanFunction {
    Zero,
    Constant { value: f64 },
    /// `slope · t + intercept`.
    Affine { slope: Vec<f64>, intercept: f64 },
}

impl MeanFunction {
    pub fn eval(&self, t: &[f64]) -> f64 {
        match self {
            MeanFunction::Zero => 0.0,
            MeanFunction::Constant { value } => *value,
            MeanFunction::Affine { slope, intercept } => {
                intercept + slope.iter().zip(t).map(|(a, x)| a * x).sum::<f64>()
            }
        }
    }

    /// True when the mean does not depend on `t`.
    pub fn is_constant(&self) -> bool {
        match self {
            MeanFunction::Zero | MeanFunction::Constant { .. } => true,
            MeanFunction::Affine { slope, .. } => slope.iter().all(|a| *a == 0.0),
        }
    }
}

/// Closed catalog of stationary covariance kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovarianceKernel {
    /// `s² exp(−h² / 2ℓ²)`
    SquaredExponential { lengthscale: f64, variance: f64 },
    /// `s² exp(−h / ℓ)` (Ornstein–Uhlenbeck in one dimension)
    Exponential { lengthscale: f64, variance: f64 },
    /// `s² (1 + √3 h/ℓ) exp(−√3 h/ℓ)`
    Matern32 { lengthscale: f64, variance: f64 },
}

impl CovarianceKernel {
    pub fn validate(&self) -> Result<()> {
        let (ell, var) = self.parameters();
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::config("lengthscale", format!("must be a positive finite number, got {ell}")));
        }
        if !(var.is_finite() && var > 0.0) {
            return Err(Error::config("variance", format!("must be a positive finite number, got {var}")));
        }
        Ok(())
    }

    /// `(lengthscale, variance)`.
    pub fn parameters(&self) -> (f64, f64) {
        match *self {
            CovarianceKernel::SquaredExponential { lengthscale, variance }
            | CovarianceKernel::Exponential { lengthscale, variance }
            | CovarianceKernel::Matern32 { lengthscale, variance } => (lengthscale, variance),
        }
    }

    pub fn variance(&self) -> f64 {
        self.parameters().1
    }

    /// Hölder exponent of the correlation modulus near the diagonal.
    pub fn holder_exponent(&self) -> f64 {
        match self {
            CovarianceKernel::Exponential { .. } => 1.0,
            CovarianceKernel::SquaredExponential { .. } | CovarianceKernel::Matern32 { .. } => 2.0,
        }
    }

    /// Covariance at Euclidean lag `h ≥ 0`.
    pub fn at_lag(&self, h: f64) -> f64 {
        match *self {
            CovarianceKernel::SquaredExponential { lengthscale, variance } => {
                let u = h / lengthscale;
                variance * (-0.5 * u * u).exp()
            }
            CovarianceKernel::Exponential { lengthscale, variance } => {
                variance * (-h / lengthscale).exp()
            }
            CovarianceKernel::Matern32 { lengthscale, variance } => {
                let u = 3f64.sqrt() * h / lengthscale;
                variance * (1.0 + u) * (-u).exp()
            }
        }
    }

    /// Covariance between two points. Symmetric bit-for-bit because the lag
    /// is accumulated from `|s_k − t_k|`.
    pub fn between(&self, s: &[f64], t: &[f64]) -> f64 {
        let h2: f64 = s
            .iter()
            .zip(t)
            .map(|(a, b)| {
                let d = (a - b).abs();
                d * d
            })
            .sum();
        self.at_lag(h2.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    pub domain: Domain,
    pub mean: MeanFunction,
    pub kernel: CovarianceKernel,
}

impl FieldModel {
    pub fn new(domain: Domain, mean: MeanFunction, kernel: CovarianceKernel) -> Result<Self> {
        kernel.validate()?;
        if let MeanFunction::Affine { slope, .. } = &mean {
            if slope.len() != domain.dimension() {
                return Err(Error::config(
                    "model.mean_slope",
                    format!("expected {} coefficients, got {}", domain.dimension(), slope.len()),
                ));
            }
        }
        let finite = match &mean {
            MeanFunction::Zero => true,
            MeanFunction::Constant { value } => value.is_finite(),
            MeanFunction::Affine { slope, intercept } => {
                intercept.is_finite() && slope.iter().all(|a| a.is_finite())
            }
        };
        if !finite {
            return Err(Error::config("model.mean", "mean parameters must be finite"));
        }
        Ok(Self { domain, mean, kernel })
    }

    /// Zero-mean field on `domain`.
    pub fn centered(domain: Domain, kernel: CovarianceKernel) -> Result<Self> {
        Self::new(domain, MeanFunction::Zero, kernel)
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Constant mean and stationary covariance.
    pub fn is_homogeneous(&self) -> bool {
        self.mean.is_constant()
    }

    pub fn eval_mean(&self, t: &[f64]) -> Result<f64> {
        self.domain.check(t)?;
        Ok(self.mean.eval(t))
    }

    pub fn eval_cov(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        self.domain.check(s)?;
        self.domain.check(t)?;
        Ok(self.kernel.between(s, t))
    }

    pub fn eval_sd(&self, t: &[f64]) -> Result<f64> {
        self.domain.check(t)?;
        Ok(self.kernel.variance().sqrt())
    }

    pub fn eval_corr(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        let c = self.eval_cov(s, t)?;
        let var = self.kernel.variance();
        if var <= 0.0 {
            return Err(Error::Internal("kernel variance is not positive".into()));
        }
        if s == t {
            return Ok(1.0);
        }
        Ok((c / var).clamp(-1.0, 1.0))
    }
}
