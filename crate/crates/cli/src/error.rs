use std::fmt::Display;

use roomtune::dataset::DatasetError;
use roomtune::fdtd::FdtdError;
use roomtune::geometry::GeometryError;
use roomtune::io::IoError;
use roomtune::modal::ModalError;
use roomtune::spectral::SpectralError;
use roomtune::sweep::SweepError;
use thiserror::Error;

/// Exit status 1 for invalid inputs, 2 for unreadable or unwritable files.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn validation(e: impl Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn io(e: impl Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::io(e)
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Parse { .. } => CliError::io(e),
            _ => CliError::validation(e),
        }
    }
}

impl From<FdtdError> for CliError {
    fn from(e: FdtdError) -> Self {
        match e {
            FdtdError::Geometry(g) => g.into(),
            _ => CliError::validation(e),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Csv(_) => CliError::io(e),
            _ => CliError::validation(e),
        }
    }
}

macro_rules! validation_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::validation(e)
            }
        }
    )*};
}

validation_errors!(ModalError, SpectralError, SweepError);
