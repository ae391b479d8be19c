use std::fmt;
use std::process::ExitCode;

use mta_core::MtaError;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, missing files or malformed input data.
    Input { kind: &'static str, message: String },
    Core(MtaError),
}

impl CliError {
    pub fn input(kind: &'static str, message: impl Into<String>) -> Self {
        CliError::Input {
            kind,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input { kind, .. } => kind,
            CliError::Core(e) => e.kind(),
        }
    }

    /// 2 for input errors, 1 for numerical or identification failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 1,
        }
    }

    pub fn report(&self) -> ExitCode {
        let message = self.to_string().replace(['\n', '\r'], " ");
        eprintln!("error kind={} exit={}: {message}", self.kind(), self.exit_code());
        ExitCode::from(self.exit_code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input { message, .. } => f.write_str(message),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<MtaError> for CliError {
    fn from(e: MtaError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(MtaError::Io(e))
    }
}
