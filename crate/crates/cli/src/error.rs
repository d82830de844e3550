use std::fmt;
use std::process::ExitCode;

use multiphonic::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Config,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(match self {
            ErrorClass::Input => 2,
            ErrorClass::Config => 3,
            ErrorClass::Internal => 4,
        })
    }

    fn tag(self) -> &'static str {
        match self {
            ErrorClass::Input => "input",
            ErrorClass::Config => "config",
            ErrorClass::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl fmt::Display) -> Self {
        CliError {
            class: ErrorClass::Input,
            message: message.to_string(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        CliError {
            class: ErrorClass::Config,
            message: message.to_string(),
        }
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        CliError {
            class: ErrorClass::Internal,
            message: message.to_string(),
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

/// One line: `error[<class>]: <message>` with newlines flattened.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self
            .message
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        write!(f, "error[{}]: {flat}", self.class.tag())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let class = match &e {
            Error::Config(_) => ErrorClass::Config,
            _ => ErrorClass::Input,
        };
        CliError {
            class,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
