use smog_core::SmogError;

#[derive(Debug)]
pub enum HarnessError {
    /// Bad configuration or usage; exit code 2.
    Config(String),
    Io(std::io::Error),
    /// A model or numerical routine failed; exit code 3.
    Model(SmogError),
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarnessError::Config(m) => write!(f, "config error: {m}"),
            HarnessError::Io(e) => write!(f, "i/o error: {e}"),
            HarnessError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e)
    }
}

impl From<SmogError> for HarnessError {
    fn from(e: SmogError) -> Self {
        HarnessError::Model(e)
    }
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Model(SmogError::InvalidArgument(_)) => 2,
            HarnessError::Model(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
