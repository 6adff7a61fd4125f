//! File formats and the command-line frontend for `dynres-core`.

pub mod cli;
pub mod format;
pub mod table;

use std::fmt;

/// Exit-code class of a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid input objects or failed computations: exit code 1.
    Domain,
    /// Malformed invocations and unreadable paths: exit code 2.
    Usage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    /// Short machine-readable category.
    pub category: String,
    pub message: String,
}

impl CliError {
    pub fn domain(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Domain, category: "invalid_input".into(), message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Usage, category: "usage".into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Domain => 1,
            ErrorKind::Usage => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<dynres_core::Error> for CliError {
    fn from(e: dynres_core::Error) -> Self {
        use dynres_core::Error as E;
        let category = match &e {
            E::Dimension(_) | E::Subsystem { .. } => "dimension",
            E::NotHermitian(_) | E::NotIsometry(_) | E::NotTracePreserving(_) => "matrix",
            E::InvalidChannel(_) => "invalid_channel",
            E::InvalidSuperchannel(_) => "invalid_superchannel",
            E::InvalidComb(_) => "invalid_comb",
            E::UnsupportedSlots(_) => "unsupported",
            E::InvalidBipartition(_) => "invalid_bipartition",
            E::NotAligned(_) | E::Realization(_) => "realization",
            E::Argument(_) => "argument",
            E::Model(_) | E::Solver(_) => "solver",
        };
        Self { kind: ErrorKind::Domain, category: category.into(), message: e.to_string() }
    }
}
