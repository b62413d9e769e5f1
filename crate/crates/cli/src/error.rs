use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("stage `{stage}` needs {file}: {msg}")]
    Dependency { stage: String, file: String, msg: String },

    #[error(transparent)]
    Core(#[from] circle_rpf::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
