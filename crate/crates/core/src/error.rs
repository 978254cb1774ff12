use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("graph is not connected ({components} components on {nodes} nodes)")]
    Disconnected { nodes: usize, components: usize },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("equation has no exact solution (residual {residual:.3e}); use the least-squares flow")]
    Unsolvable { residual: f64 },

    #[error("non-finite derivative at t = {t}: {detail}")]
    NonFinite { t: f64, detail: String },

    #[error("state diverged at t = {t} (norm {norm:.3e} > 1e12); try a smaller dt (current {dt})")]
    Diverged { t: f64, norm: f64, dt: f64 },

    #[error("rate unmeasurable: error reached the numerical floor")]
    FloorReached,

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::NonFinite { .. } => 2,
            Error::Unsolvable { .. } => 3,
            Error::Verification(_) => 4,
            _ => 1,
        }
    }
}
