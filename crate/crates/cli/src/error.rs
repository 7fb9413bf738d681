//! Error type of the front-end and its mapping onto exit codes.

use drfd::ambiguity::AmbiguityError;
use drfd::bounds::BoundsError;
use drfd::design::DesignError;
use drfd::sysmodel::SysModelError;
use drfd::verify::VerifyError;
use drfd::{ConicError, LinalgError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input data.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    /// The solver failed or the problem is infeasible.
    #[error("{0}")]
    Solver(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<AmbiguityError> for CliError {
    fn from(e: AmbiguityError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ConicError> for CliError {
    fn from(e: ConicError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::SolverError { .. } | BoundsError::Conic(_) => CliError::Solver(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::DesignFailed(grid) => {
                let mut msg = String::from("design failed at every tau0 grid point:");
                for g in grid {
                    let tau = g.tau0.map_or("-".to_string(), |t| format!("{t:.6}"));
                    let status = g.status.map_or("-".to_string(), |s| format!("{s:?}"));
                    let kkt = g.kkt.map_or("-".to_string(), |k| format!("{:.2e}", k.max()));
                    let err = g.error.unwrap_or_default();
                    msg.push_str(&format!("\n  tau0 {tau}: status {status}, kkt {kkt} {err}"));
                }
                CliError::Solver(msg)
            }
            DesignError::CertificationFailed(_) | DesignError::Conic(_) => CliError::Solver(e.to_string()),
            DesignError::Bounds(b) => b.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SysModelError> for CliError {
    fn from(e: SysModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(DesignError::DesignFailed(vec![])).exit_code(), 3);
        assert_eq!(CliError::from(DesignError::CertificationFailed(0.2)).exit_code(), 3);
        assert_eq!(CliError::from(DesignError::InvalidEpsilon(2.0)).exit_code(), 2);
        assert_eq!(CliError::from(BoundsError::InvalidTau0(0.5)).exit_code(), 2);
        assert_eq!(CliError::from(DesignError::Bounds(BoundsError::InvalidAlpha(-1.0))).exit_code(), 2);
        assert_eq!(CliError::Invariant("x".into()).exit_code(), 4);
        assert_eq!(CliError::Io("x".into()).exit_code(), 2);
    }
}
