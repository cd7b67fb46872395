use std::fmt;

use thiserror::Error;

/// One violated parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Dotted path of the offending field, e.g. `model.alpha`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every violation found by a validation pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationErrors(pub Vec<Violation>);

impl ValidationErrors {
    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.0.iter()
    }

    /// True if any violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|v| v.message.contains(needle))
    }

    pub fn into_result(self) -> Result<(), ValidationErrors> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(#[from] ValidationErrors),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("field does not match grid: {0}")]
    Shape(String),

    #[error("field contains a negative or non-finite value at index {index}")]
    InvalidField { index: usize },

    #[error("boundary face {face} has accommodation {iota} > 0 but no valid wall temperature")]
    UndefinedWallTemperature { face: usize, iota: f64 },

    #[error("time step {dt} exceeds the CFL bound {max}")]
    Cfl { dt: f64, max: f64 },

    #[error("non-finite values after step {step}")]
    NonFinite { step: usize },

    #[error("steady state not reached after {steps} steps (increment {residual:e})")]
    NotConverged { steps: usize, residual: f64 },

    #[error("energy map value {value} at nu = {nu} left the interval [0, {upper}]")]
    OutOfInterval { nu: f64, value: f64, upper: f64 },

    #[error("fixed-point budget of {iterations} iterations exhausted (|F(nu) - nu| = {residual:e})")]
    FixedPointBudget { iterations: usize, residual: f64 },

    #[error("perturbed initial datum is not admissible: {0}")]
    Perturbation(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. }
                | Error::NonFinite { .. }
                | Error::NotConverged { .. }
                | Error::OutOfInterval { .. }
                | Error::FixedPointBudget { .. }
                | Error::Quadrature(_)
                | Error::Perturbation(_)
        )
    }

    /// Short machine-readable reason code.
    pub fn reason_code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation_error",
            Error::Grid(_) => "invalid_grid",
            Error::NonPositiveTemperature(_) => "nonpositive_temperature",
            Error::Shape(_) => "shape_mismatch",
            Error::InvalidField { .. } => "invalid_field",
            Error::UndefinedWallTemperature { .. } => "undefined_wall_temperature",
            Error::Cfl { .. } => "cfl_violation",
            Error::NonFinite { .. } => "instability",
            Error::NotConverged { .. } => "not_converged",
            Error::OutOfInterval { .. } => "energy_map_out_of_interval",
            Error::FixedPointBudget { .. } => "fixed_point_budget_exhausted",
            Error::Perturbation(_) => "invalid_perturbation",
            Error::Quadrature(_) => "quadrature_failure",
            Error::Snapshot(_) => "snapshot_format",
            Error::Io(_) => "io_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
