use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("simulation window is empty: x_max = {0}")]
    EmptyWindow(usize),

    #[error("checkpoint at t = {t} precedes last recorded time {last}")]
    OutOfOrder { t: f64, last: f64 },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },

    #[error("negative front speed {0}")]
    NegativeSpeed(f64),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("run {run_id} failed: {source}")]
    Run {
        run_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{} of {} runs failed (first: run {} - {})", failures.len(), failures.len() + completed.len(), failures[0].0, failures[0].1)]
    Ensemble {
        completed: Vec<u64>,
        failures: Vec<(u64, String)>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// True for errors caused by bad user input rather than a failing computation.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidParams(_) | Error::EmptyWindow(_) | Error::Unstable { .. } => true,
            Error::Run { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
