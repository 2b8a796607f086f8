//! Exit-code mapping: 0 success, 2 usage/config errors, 3 numeric or
//! fit failures.

use dakd_core::protocol::ProtocolError;
use dakd_core::qmath::MathError;
use dakd_core::timetag::TimetagError;

#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Numeric(String),
    Io(std::io::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Numeric(_) => 3,
            CmdError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CmdError::Usage(m) => format!("error: {m}"),
            CmdError::Numeric(m) => format!("error: {m}"),
            CmdError::Io(e) => format!("error: {e}"),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

impl From<MathError> for CmdError {
    fn from(e: MathError) -> Self {
        CmdError::Numeric(e.to_string())
    }
}

impl From<ProtocolError> for CmdError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::InvalidConfig(_) | ProtocolError::EmptySample => {
                CmdError::Usage(e.to_string())
            }
            other => CmdError::Numeric(other.to_string()),
        }
    }
}

impl From<TimetagError> for CmdError {
    fn from(e: TimetagError) -> Self {
        match e {
            TimetagError::InsufficientCounts { .. }
            | TimetagError::FitNotConcave
            | TimetagError::UnusableWidth(_) => CmdError::Numeric(e.to_string()),
            TimetagError::Io(io) => CmdError::Io(io),
            other => CmdError::Usage(other.to_string()),
        }
    }
}
