use std::fmt;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, config file or map definition (exit 2).
    Config(String),
    /// The analysis produced nothing (exit 3).
    Empty(String),
    /// No positive blowup in the searched region (exit 4).
    NoBlowup(String),
    /// `--check` assertions failed (exit 5).
    Check(Vec<String>),
    /// Anything else, including I/O (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Empty(_) => 3,
            CliError::NoBlowup(_) => 4,
            CliError::Check(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Empty(m) => write!(f, "empty result: {m}"),
            CliError::NoBlowup(m) => write!(f, "no blowup: {m}"),
            CliError::Check(fails) => {
                write!(f, "{} check(s) failed", fails.len())?;
                for m in fails {
                    write!(f, "\n  {m}")?;
                }
                Ok(())
            }
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

/// Maps library errors: bad map definitions and expressions are configuration
/// errors, a missing blowup keeps its own code.
impl From<hodograph::Error> for CliError {
    fn from(e: hodograph::Error) -> Self {
        use hodograph::Error as E;
        match e {
            E::Spec(_) | E::Expr(_) | E::Dimension { .. } => CliError::Config(e.to_string()),
            E::NoBlowup => CliError::NoBlowup(e.to_string()),
            E::EmptyLocus => CliError::Empty(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
