//! Exit codes and the error type commands return.

use std::fmt;

use standoff::inline::ConvertError;
use standoff::sections::GuidelineError;
use standoff::StoreError;

use crate::config::ConfigError;

pub const SUCCESS: u8 = 0;
/// Some documents or records failed; the rest were processed.
pub const PARTIAL: u8 = 1;
pub const STORE: u8 = 2;
/// A config entry, input file, or earlier pipeline stage is missing.
pub const PREREQUISITE: u8 = 3;
pub const UNKNOWN_RELATION: u8 = 4;
pub const MALFORMED_XML: u8 = 5;
/// Bad arguments or unparseable non-XML input.
pub const USAGE: u8 = 64;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn prerequisite(message: impl Into<String>) -> Self {
        Self::new(PREREQUISITE, message)
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Self::new(STORE, format!("store error: {e}"))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::prerequisite(format!("config: {e}"))
    }
}

impl From<ConvertError> for Failure {
    fn from(e: ConvertError) -> Self {
        Self::new(MALFORMED_XML, e.to_string())
    }
}

impl From<GuidelineError> for Failure {
    fn from(e: GuidelineError) -> Self {
        let code = match e {
            GuidelineError::Malformed { .. } => MALFORMED_XML,
            _ => PREREQUISITE,
        };
        Self::new(code, format!("guideline: {e}"))
    }
}

pub type CmdResult = Result<u8, Failure>;
