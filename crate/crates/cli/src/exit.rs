//! Exit-code contract: 0 ok, 1 runtime failure, 2 configuration, 3 artifact,
//! 4 data.

use std::fmt;

pub const CONFIG: u8 = 2;
pub const ARTIFACT: u8 = 3;
pub const DATA: u8 = 4;
const RUNTIME: u8 = 1;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self {
            code: RUNTIME,
            error: e.into(),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait ExitCodeExt<T> {
    /// Tags the error with an exit code.
    fn exit_code(self, code: u8) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> ExitCodeExt<T> for Result<T, E> {
    fn exit_code(self, code: u8) -> CmdResult<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

pub fn fail<T>(code: u8, msg: impl fmt::Display) -> CmdResult<T> {
    Err(Failure {
        code,
        error: anyhow::anyhow!("{msg}"),
    })
}
