use std::path::PathBuf;

use thiserror::Error;

/// Which half of the two-domain mesh an item belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Stator,
    Rotor,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::Stator => f.write_str("stator"),
            Domain::Rotor => f.write_str("rotor"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid machine geometry: {0}")]
    Geometry(String),

    #[error("meshing failed: {0}")]
    Mesh(String),

    #[error("{domain} triangle {triangle} has non-positive area {area:e}")]
    DegenerateTriangle {
        domain: Domain,
        triangle: usize,
        area: f64,
    },

    #[error("eccentricity {eccentricity} is outside the admissible range |eps| < 1")]
    Eccentricity { eccentricity: f64 },

    #[error("winding layout: {0}")]
    Winding(String),

    #[error("magnet region {0} has no orientation")]
    MagnetOrientation(usize),

    #[error("interface coupling: {0}")]
    Coupling(String),

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("series shape mismatch: {0}")]
    Shape(String),

    #[error("trace does not cover an integer number of periods ({0})")]
    PeriodCoverage(String),

    #[error("total harmonic distortion undefined: mean torque is zero")]
    ThdUndefined,

    #[error("maxwell stress contour: {0}")]
    Contour(String),

    #[error("uncertainty quantification: {0}")]
    Uq(String),

    #[error("sensitivity indices undefined: total variance is zero")]
    ZeroVariance,

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
