use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Hypothesis(_) => 3,
            CliError::Numerical(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Hypothesis(_) => "hypothesis",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        }
    }
}

impl From<delaystab::Error> for CliError {
    fn from(e: delaystab::Error) -> Self {
        use delaystab::Error as E;
        let msg = e.to_string();
        match e {
            E::Options(_) | E::Construction(_) | E::Domain(_) => CliError::Config(msg),
            E::Hypothesis(_)
            | E::UnsupportedRegime(_)
            | E::BoundInapplicable(_)
            | E::Precondition(_) => CliError::Hypothesis(msg),
            _ => CliError::Numerical(msg),
        }
    }
}
