use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain")]
    DomainViolation { point: Vec<f64> },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("covariance matrix of order {order} is not factorizable (last jitter tried: {jitter:e})")]
    NearSingular { order: usize, jitter: f64 },

    #[error("level {level} is out of range: {reason}")]
    LevelOutOfRange { level: f64, reason: String },

    #[error("degenerate ratio estimate: denominator {denominator:e} is not positive")]
    DegenerateRatio { denominator: f64 },

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Equivalent error, for failures cached and reported more than once.
    pub(crate) fn replay(&self) -> Self {
        match self {
            Error::DomainViolation { point } => Error::DomainViolation { point: point.clone() },
            Error::Argument(m) => Error::Argument(m.clone()),
            Error::NearSingular { order, jitter } => Error::NearSingular {
                order: *order,
                jitter: *jitter,
            },
            Error::LevelOutOfRange { level, reason } => Error::LevelOutOfRange {
                level: *level,
                reason: reason.clone(),
            },
            Error::DegenerateRatio { denominator } => Error::DegenerateRatio {
                denominator: *denominator,
            },
            Error::Config { key, message } => Error::config(key.clone(), message.clone()),
            Error::Internal(m) => Error::Internal(m.clone()),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), e.to_string())),
        }
    }

    /// Short machine-readable category, also used to pick the process exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config { .. } | Error::Argument(_) | Error::DomainViolation { .. } => "config",
            Error::NearSingular { .. } | Error::DegenerateRatio { .. } | Error::Internal(_) => {
                "numeric"
            }
            Error::LevelOutOfRange { .. } => "level-out-of-range",
            Error::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "numeric" => 3,
            "level-out-of-range" => 4,
            _ => 1,
        }
    }
}
