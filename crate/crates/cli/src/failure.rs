use std::fmt;
use std::process::ExitCode;

use rcs_core::Error;

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, unreadable files, invalid parameters. Exit status 2.
    Input(String),
    /// Quadrature or optimizer failure, or a failed check. Exit status 1.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Input(_) => ExitCode::from(2),
            Failure::Numerical(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn is_numerical(e: &Error) -> bool {
    match e {
        Error::Quadrature { .. } | Error::Infeasible(_) => true,
        Error::Curve { source, .. } => is_numerical(source),
        Error::Domain(_) | Error::Construction(_) | Error::Dimension { .. } => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_numerical(&e) {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}
