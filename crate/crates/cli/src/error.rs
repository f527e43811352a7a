use std::fmt::Display;
use std::process::ExitCode;

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Inputs were readable but rejected (schema, ranges, compatibility).
    Invalid(anyhow::Error),
    /// Files could not be read, written or parsed.
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Invalid(_) => ExitCode::from(1),
            Failure::Io(_) => ExitCode::from(2),
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Invalid(e) | Failure::Io(e) => e,
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn io_ctx<C: Display + Send + Sync + 'static>(self, ctx: C) -> CmdResult<T>;
    fn invalid_ctx<C: Display + Send + Sync + 'static>(self, ctx: C) -> CmdResult<T>;
}

impl<T, E> Classify<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn io_ctx<C: Display + Send + Sync + 'static>(self, ctx: C) -> CmdResult<T> {
        self.map_err(|e| Failure::Io(e.into().context(ctx)))
    }

    fn invalid_ctx<C: Display + Send + Sync + 'static>(self, ctx: C) -> CmdResult<T> {
        self.map_err(|e| Failure::Invalid(e.into().context(ctx)))
    }
}

pub fn invalid(msg: impl Display) -> Failure {
    Failure::Invalid(anyhow::anyhow!("{msg}"))
}
