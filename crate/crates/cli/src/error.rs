use std::fmt;

/// Exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Bad flags, unreadable or malformed input files.
    Input,
    /// Valid input on which a pipeline stage gave up.
    Pipeline,
}

impl Failure {
    pub fn exit_code(self) -> u8 {
        match self {
            Failure::Input => 2,
            Failure::Pipeline => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Failure,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn input(source: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind: Failure::Input,
            source: source.into(),
        }
    }

    pub fn pipeline(source: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind: Failure::Pipeline,
            source: source.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

/// Core errors keep their own classification; anything else is an input
/// problem.
impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        let pipeline = e
            .chain()
            .filter_map(|c| c.downcast_ref::<bounce_core::Error>())
            .any(|c| !c.is_input_error());
        CliError {
            kind: if pipeline {
                Failure::Pipeline
            } else {
                Failure::Input
            },
            source: e,
        }
    }
}

impl From<bounce_core::Error> for CliError {
    fn from(e: bounce_core::Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn core_errors_keep_their_class() {
        let e: CliError = bounce_core::Error::SegmentationFailed(1).into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = bounce_core::Error::UnknownCode("ZZZ".into()).into();
        assert_eq!(e.exit_code(), 2);
        let wrapped: anyhow::Result<()> =
            Err(bounce_core::Error::TrampolineNotFound).context("extracting");
        assert_eq!(CliError::from(wrapped.unwrap_err()).exit_code(), 3);
        assert_eq!(CliError::from(anyhow::anyhow!("plain")).exit_code(), 2);
    }
}
