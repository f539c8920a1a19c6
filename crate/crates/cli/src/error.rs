use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read metadata {path}: {message}")]
    Metadata { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] blufs::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 for configuration and argument problems,
    /// 2 for input/output and parsing, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use blufs::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Metadata { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::Dimension(_) | E::IsolatedVertex { .. } => 1,
                E::Parse { .. } | E::Format(_) | E::Io { .. } | E::Csv(_) => 2,
                E::Numerical(_) => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(blufs::Error::InvalidArgument("x".into())).exit_code(), 1);
        assert_eq!(CliError::Core(blufs::Error::Format("x".into())).exit_code(), 2);
        assert_eq!(CliError::io("a", std::io::Error::other("x")).exit_code(), 2);
        assert_eq!(CliError::Core(blufs::Error::Numerical("x".into())).exit_code(), 3);
    }
}
