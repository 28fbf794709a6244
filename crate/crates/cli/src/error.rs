use thiserror::Error;

/// Failure classes of an experiment run; each maps to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or input files. Nothing has been computed.
    #[error("{0}")]
    Config(String),

    /// The computation itself failed or did not converge.
    #[error("{0}")]
    Numerical(String),

    /// Writing an output file failed.
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Output(_) => 1,
        }
    }

    pub fn config(key: &str, why: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{key}: {why}"))
    }
}

impl From<plap_core::Error> for CliError {
    fn from(e: plap_core::Error) -> Self {
        use plap_core::Error as E;
        match e {
            E::Domain { .. }
            | E::Config(_)
            | E::InsufficientResolution(_)
            | E::NodeLookup(_)
            | E::OutOfDomain(_)
            | E::Parse(_) => CliError::Config(e.to_string()),
            E::DegenerateInput(_)
            | E::DegenerateProfile { .. }
            | E::CriticalPoint(_)
            | E::NumericalBreakdown(_) => CliError::Numerical(e.to_string()),
            E::Io(_) | E::Csv(_) => CliError::Output(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
