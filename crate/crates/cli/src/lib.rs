//! Config parsing, reports, CSV and SVG output for the `pidfit` binary.

use std::fmt;

pub mod config;
pub mod output;
pub mod report;
pub mod svg;

/// Why a command failed; each kind has its own exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<pidfit::Error> for Failure {
    fn from(e: pidfit::Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}
