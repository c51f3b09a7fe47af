//! TOML run configuration: raw schema, defaults and validation.

use std::path::PathBuf;

use serde::Deserialize;

use crate::discretization::{regular_grid, uniform_points, PointSet};
use crate::error::{Error, Result};
use crate::estimators::{Functional, HolderOverrides, Method, SmoothSettings};
use crate::field::{CovarianceKernel, Domain, FieldModel, MeanFunction};
use crate::rng::SeedSequence;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: String,
    model: RawModel,
    points: Option<RawPoints>,
    run: RawRun,
    #[serde(default)]
    overrides: RawOverrides,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kernel: String,
    lengthscale: f64,
    #[serde(default = "one")]
    variance: f64,
    #[serde(default = "zero_mean")]
    mean: String,
    mean_constant: Option<f64>,
    mean_slope: Option<Vec<f64>>,
    domain: RawDomain,
}

fn one() -> f64 {
    1.0
}

fn zero_mean() -> String {
    "zero".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoints {
    explicit: Option<Vec<Vec<f64>>>,
    theta: Option<f64>,
    uniform: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    algorithm: Option<String>,
    b: Option<f64>,
    levels: Option<Vec<f64>>,
    epsilon: Option<f64>,
    epsilons: Option<Vec<f64>>,
    n: usize,
    n_naive: Option<usize>,
    n_is: Option<usize>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    batches: usize,
    delta: Option<f64>,
    functional: Option<String>,
    under_resolved: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverrides {
    a: Option<f64>,
    #[serde(rename = "M")]
    m: Option<usize>,
    theta: Option<f64>,
    v: Option<f64>,
    #[serde(rename = "M_max")]
    m_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Sweep,
    BiasStudy,
    Compare,
    CondExpect,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Sweep => "sweep",
            Command::BiasStudy => "bias-study",
            Command::Compare => "compare",
            Command::CondExpect => "cond-expect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmChoice {
    Naive,
    Finite,
    Holder,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::config("output.format", format!("expected `json` or `csv`, got `{other}`"))),
        }
    }
}

/// Where the estimator's fixed points come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PointSpec {
    Explicit(Vec<Vec<f64>>),
    /// θ-regular lattice.
    Regular(f64),
    /// `m` uniform points drawn once from the run seed.
    Uniform(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overrides {
    pub a: Option<f64>,
    pub m: Option<usize>,
    pub theta: Option<f64>,
    pub v: f64,
    pub m_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalChoice {
    ExcursionVolume,
    ExceedFraction,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub model: FieldModel,
    pub algorithm: Option<AlgorithmChoice>,
    pub points: Option<PointSpec>,
    pub b: Option<f64>,
    pub levels: Vec<f64>,
    pub epsilon: Option<f64>,
    pub epsilons: Vec<f64>,
    pub n: usize,
    pub n_naive: Option<usize>,
    pub n_is: Option<usize>,
    pub seed: u64,
    pub batches: usize,
    pub delta: f64,
    pub functional: Option<FunctionalChoice>,
    pub under_resolved: bool,
    pub overrides: Overrides,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

/// Dotted key of the assignment at byte `offset`, for error messages.
fn key_at(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if pos > offset {
            break;
        }
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((lhs, _)) = trimmed.split_once('=') {
            key = lhs.trim().to_string();
        }
        pos += line.len();
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(key, "required for this command"))
}

fn positive(value: f64, key: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::config(key, format!("must be a positive finite number, got {value}")))
    }
}

fn unit_interval(value: f64, key: &str, closed: bool) -> Result<f64> {
    let ok = value > 0.0 && (value < 1.0 || (closed && value == 1.0));
    if ok {
        Ok(value)
    } else {
        let range = if closed { "(0, 1]" } else { "(0, 1)" };
        Err(Error::config(key, format!("must lie in {range}, got {value}")))
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let key = e.span().map(|s| key_at(text, s.start)).unwrap_or_default();
        Error::config(if key.is_empty() { "document".to_string() } else { key }, e.message().to_string())
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<RunConfig> {
    let command = match raw.command.as_str() {
        "estimate" => Command::Estimate,
        "sweep" => Command::Sweep,
        "bias-study" => Command::BiasStudy,
        "compare" => Command::Compare,
        "cond-expect" => Command::CondExpect,
        other => {
            return Err(Error::config(
                "command",
                format!("expected one of estimate, sweep, bias-study, compare, cond-expect; got `{other}`"),
            ))
        }
    };
    let model = build_model(&raw.model)?;

    let run = &raw.run;
    let algorithm = run
        .algorithm
        .as_deref()
        .map(|name| match name {
            "naive" => Ok(AlgorithmChoice::Naive),
            "finite" => Ok(AlgorithmChoice::Finite),
            "holder" => Ok(AlgorithmChoice::Holder),
            "smooth" => Ok(AlgorithmChoice::Smooth),
            other => Err(Error::config(
                "run.algorithm",
                format!("expected one of naive, finite, holder, smooth; got `{other}`"),
            )),
        })
        .transpose()?;
    if algorithm == Some(AlgorithmChoice::Smooth) && !model.is_homogeneous() {
        return Err(Error::config(
            "model.mean",
            "the smooth algorithm requires a homogeneous field (constant mean)",
        ));
    }
    if run.n == 0 {
        return Err(Error::config("run.n", "must be at least 1"));
    }
    if let Some(b) = run.b {
        if !b.is_finite() {
            return Err(Error::config("run.b", "must be finite"));
        }
    }
    let epsilon = run.epsilon.map(|e| unit_interval(e, "run.epsilon", true)).transpose()?;
    let epsilons = run.epsilons.clone().unwrap_or_default();
    for &e in &epsilons {
        unit_interval(e, "run.epsilons", true)?;
    }
    let levels = run.levels.clone().unwrap_or_default();
    if levels.iter().any(|b| !b.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("run.levels", "levels must be finite and strictly increasing"));
    }
    if run.n_naive == Some(0) {
        return Err(Error::config("run.n_naive", "must be at least 1"));
    }
    if run.batches > 0 && run.batches % 2 == 0 {
        return Err(Error::config("run.batches", "must be odd (or 0 to disable)"));
    }
    let delta = unit_interval(run.delta.unwrap_or(0.1), "run.delta", false)?;
    let functional = run
        .functional
        .as_deref()
        .map(|f| match f {
            "excursion-volume" => Ok(FunctionalChoice::ExcursionVolume),
            "exceed-count-fraction" => Ok(FunctionalChoice::ExceedFraction),
            other => Err(Error::config(
                "run.functional",
                format!("expected excursion-volume or exceed-count-fraction, got `{other}`"),
            )),
        })
        .transpose()?;

    let o = &raw.overrides;
    let overrides = Overrides {
        a: o.a.map(|a| positive(a, "overrides.a")).transpose()?,
        m: match o.m {
            Some(0) => return Err(Error::config("overrides.M", "must be at least 1")),
            m => m,
        },
        theta: o.theta.map(|t| positive(t, "overrides.theta")).transpose()?,
        v: positive(o.v.unwrap_or(0.5), "overrides.v")?,
        m_max: match o.m_max {
            Some(0) => return Err(Error::config("overrides.M_max", "must be at least 1")),
            m => m.unwrap_or(4096),
        },
    };

    let points = raw.points.as_ref().map(|p| build_point_spec(p, &model.domain)).transpose()?;
    let format = raw.output.format.as_deref().unwrap_or("json").parse()?;

    let config = RunConfig {
        command,
        model,
        algorithm,
        points,
        b: run.b,
        levels,
        epsilon,
        epsilons,
        n: run.n,
        n_naive: run.n_naive,
        n_is: run.n_is,
        seed: run.seed,
        batches: run.batches,
        delta,
        functional,
        under_resolved: run.under_resolved.unwrap_or(true),
        overrides,
        output_path: raw.output.path.clone(),
        format,
    };
    check_command(&config)?;
    Ok(config)
}

fn build_model(m: &RawModel) -> Result<FieldModel> {
    let lengthscale = positive(m.lengthscale, "model.lengthscale")
        .map_err(|_| Error::config("lengthscale", format!("model.lengthscale must be positive, got {}", m.lengthscale)))?;
    let variance = positive(m.variance, "model.variance")
        .map_err(|_| Error::config("variance", format!("model.variance must be positive, got {}", m.variance)))?;
    let kernel = match m.kernel.as_str() {
        "sqexp" | "squared-exponential" => CovarianceKernel::SquaredExponential { lengthscale, variance },
        "exponential" | "exp" => CovarianceKernel::Exponential { lengthscale, variance },
        "matern32" => CovarianceKernel::Matern32 { lengthscale, variance },
        other => {
            return Err(Error::config(
                "model.kernel",
                format!("expected sqexp, exponential or matern32; got `{other}`"),
            ))
        }
    };
    let domain = Domain::new(m.domain.lower.clone(), m.domain.upper.clone())
        .map_err(|e| Error::config("model.domain", e.to_string()))?;
    let mean = match m.mean.as_str() {
        "zero" => MeanFunction::Zero,
        "constant" => MeanFunction::Constant {
            value: require(m.mean_constant, "model.mean_constant")?,
        },
        "affine" => MeanFunction::Affine {
            slope: require(m.mean_slope.clone(), "model.mean_slope")?,
            intercept: m.mean_constant.unwrap_or(0.0),
        },
        other => {
            return Err(Error::config(
                "model.mean",
                format!("expected zero, constant or affine; got `{other}`"),
            ))
        }
    };
    if m.mean != "affine" && m.mean_slope.is_some() {
        return Err(Error::config("model.mean_slope", "only valid with mean = \"affine\""));
    }
    FieldModel::new(domain, mean, kernel)
}

fn build_point_spec(p: &RawPoints, domain: &Domain) -> Result<PointSpec> {
    let given = [p.explicit.is_some(), p.theta.is_some(), p.uniform.is_some()];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(Error::config("points", "give exactly one of explicit, theta, uniform"));
    }
    if let Some(list) = &p.explicit {
        if list.is_empty() {
            return Err(Error::config("points.explicit", "need at least one point"));
        }
        for t in list {
            if t.len() != domain.dimension() || !domain.contains(t) {
                return Err(Error::config("points.explicit", format!("point {t:?} is not in the domain")));
            }
        }
        return Ok(PointSpec::Explicit(list.clone()));
    }
    if let Some(theta) = p.theta {
        positive(theta, "points.theta")?;
        regular_grid(domain, theta).map_err(|e| Error::config("points.theta", e.to_string()))?;
        return Ok(PointSpec::Regular(theta));
    }
    match p.uniform {
        Some(0) | None => Err(Error::config("points.uniform", "must be at least 1")),
        Some(m) => Ok(PointSpec::Uniform(m)),
    }
}

fn check_command(c: &RunConfig) -> Result<()> {
    match c.command {
        Command::Estimate | Command::CondExpect => {
            require(c.algorithm, "run.algorithm")?;
            require(c.b, "run.b")?;
            if c.command == Command::CondExpect {
                require(c.functional, "run.functional")?;
            }
        }
        Command::Sweep => {
            require(c.algorithm, "run.algorithm")?;
            if c.levels.is_empty() {
                return Err(Error::config("run.levels", "required for this command"));
            }
        }
        Command::Compare => {
            let alg = require(c.algorithm, "run.algorithm")?;
            if alg == AlgorithmChoice::Naive {
                return Err(Error::config("run.algorithm", "compare needs an importance-sampling algorithm"));
            }
            if c.levels.is_empty() && c.b.is_none() {
                return Err(Error::config("run.levels", "give run.levels or run.b"));
            }
            require(c.n_naive, "run.n_naive")?;
        }
        Command::BiasStudy => {
            require(c.b, "run.b")?;
            if c.epsilons.is_empty() {
                return Err(Error::config("run.epsilons", "required for this command"));
            }
            if !c.model.is_homogeneous() {
                return Err(Error::config("model.mean", "the bias study requires a homogeneous field"));
            }
        }
    }
    if let Some(alg) = c.algorithm {
        if c.command != Command::BiasStudy {
            match alg {
                AlgorithmChoice::Naive | AlgorithmChoice::Finite => {
                    require(c.points.as_ref(), "points")?;
                }
                AlgorithmChoice::Holder | AlgorithmChoice::Smooth => {
                    require(c.epsilon, "run.epsilon")?;
                }
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Fixed point set for the finite and crude estimators.
    pub fn point_set(&self) -> Result<PointSet> {
        match require(self.points.as_ref(), "points")? {
            PointSpec::Explicit(list) => PointSet::from_points(list),
            PointSpec::Regular(theta) => regular_grid(&self.model.domain, *theta),
            PointSpec::Uniform(m) => {
                let mut rng = SeedSequence::new(self.seed).derive_tag("points").stream(0);
                uniform_points(&self.model.domain, *m, &mut rng)
            }
        }
    }

    pub fn method(&self) -> Result<Method> {
        Ok(match require(self.algorithm, "run.algorithm")? {
            AlgorithmChoice::Naive => Method::Naive { points: self.point_set()? },
            AlgorithmChoice::Finite => Method::Finite { points: self.point_set()? },
            AlgorithmChoice::Holder => Method::Holder {
                epsilon: require(self.epsilon, "run.epsilon")?,
                overrides: HolderOverrides {
                    a: self.overrides.a,
                    m: self.overrides.m,
                    v: self.overrides.v,
                    m_max: self.overrides.m_max,
                },
            },
            AlgorithmChoice::Smooth => Method::Smooth {
                epsilon: require(self.epsilon, "run.epsilon")?,
                settings: SmoothSettings {
                    theta: self.overrides.theta,
                    delta: self.delta,
                },
            },
        })
    }

    pub fn functional(&self) -> Result<Functional> {
        let level = require(self.b, "run.b")?;
        Ok(match require(self.functional, "run.functional")? {
            FunctionalChoice::ExcursionVolume => Functional::ExcursionVolume { level },
            FunctionalChoice::ExceedFraction => Functional::ExceedFraction { level },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "estimate"

[model]
kernel = "exponential"
lengthscale = 1.0

[model.domain]
lower = [0.0]
upper = [1.0]

[run]
algorithm = "holder"
b = 3.0
epsilon = 0.25
n = 1000
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.command, Command::Estimate);
        assert_eq!(c.overrides.v, 0.5);
        assert_eq!(c.overrides.m_max, 4096);
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.seed, 0);
        assert_eq!(c.delta, 0.1);
    }

    #[test]
    fn zero_lengthscale_names_the_key() {
        let text = MINIMAL.replace("lengthscale = 1.0", "lengthscale = 0.0").replace("exponential", "sqexp");
        match parse_config(&text).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "lengthscale"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn smooth_with_affine_mean_is_rejected() {
        let text = MINIMAL
            .replace("algorithm = \"holder\"", "algorithm = \"smooth\"")
            .replace("lengthscale = 1.0", "lengthscale = 1.0\nmean = \"affine\"\nmean_slope = [1.0]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("homogeneous"), "{err}");
        assert_eq!(err.category(), "config");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = MINIMAL.replace("n = 1000", "n = 1000\nsede = 4");
        match parse_config(&text).unwrap_err() {
            Error::Config { key, message } => {
                assert!(message.contains("sede"), "{message}");
                assert!(key.starts_with("run"), "{key}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let text = MINIMAL.replace("b = 3.0", "b = \"high\"");
        match parse_config(&text).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "run.b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn range_errors_name_the_key() {
        for (from, to, key) in [
            ("epsilon = 0.25", "epsilon = 1.5", "run.epsilon"),
            ("n = 1000", "n = 0", "run.n"),
            ("n = 1000", "n = 1000\nbatches = 4", "run.batches"),
        ] {
            match parse_config(&MINIMAL.replace(from, to)).unwrap_err() {
                Error::Config { key: k, .. } => assert_eq!(k, key),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn finite_needs_points() {
        let text = MINIMAL.replace("algorithm = \"holder\"", "algorithm = \"finite\"");
        match parse_config(&text).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "points"),
            other => panic!("unexpected {other:?}"),
        }
        let with_points = format!("{text}\n[points]\nexplicit = [[0.0], [1.0]]\n");
        let c = parse_config(&with_points).unwrap();
        assert_eq!(c.point_set().unwrap().len(), 2);
    }
}
