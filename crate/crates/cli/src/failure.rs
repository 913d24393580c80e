use std::fmt::Display;

pub const PROPERTY_FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const RUNTIME: u8 = 3;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl Display) -> Self {
        Self {
            code: USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn runtime(msg: impl Display) -> Self {
        Self {
            code: RUNTIME,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl From<eqnet_core::Error> for Failure {
    fn from(e: eqnet_core::Error) -> Self {
        use eqnet_core::Error::*;
        let code = match e {
            Parse(_) | Json(_) | Config(_) | Architecture(_) | NotABijection { .. } | DegreeMismatch { .. }
            | NotInGroup(_) | CapExceeded { .. } | GroupMismatch => USAGE,
            _ => RUNTIME,
        };
        Self { code, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: RUNTIME,
            error: e.into(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self {
            code: RUNTIME,
            error: e.into(),
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;
