use std::fmt;

use koopman_core::KoopmanError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
/// Some average did not settle; results were still written.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Input,
    Numerical,
}

/// A failed run, classified for the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { kind: FailureKind::Input, message: message.into() }
    }

    /// Wraps a library error with the module that raised it and a short
    /// description of the run.
    pub fn module(module: &str, context: &str, err: KoopmanError) -> Self {
        let kind = if err.is_input_error() { FailureKind::Input } else { FailureKind::Numerical };
        CliError { kind, message: format!("{module}: {err} ({context})") }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Input => EXIT_INPUT,
            FailureKind::Numerical => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches module and run context to library results.
pub trait Context<T> {
    fn within(self, module: &str, context: &str) -> CliResult<T>;
}

impl<T> Context<T> for koopman_core::Result<T> {
    fn within(self, module: &str, context: &str) -> CliResult<T> {
        self.map_err(|e| CliError::module(module, context, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_family() {
        let e = CliError::module("averaging", "system=standard_map", KoopmanError::EmptyData("x".into()));
        assert_eq!(e.exit_code(), EXIT_INPUT);
        assert!(e.message.starts_with("averaging: "));
        assert!(e.message.contains("system=standard_map"));
        let e = CliError::module("spectral_dmd", "", KoopmanError::NoConvergence(30));
        assert_eq!(e.exit_code(), EXIT_NUMERICAL);
    }
}
