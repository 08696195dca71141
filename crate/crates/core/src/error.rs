use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid mechanism: {0}")]
    Mechanism(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("integration failed: step size underflow at t = {t_reached} (system too stiff for the explicit integrator)")]
    Stiffness { t_reached: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("candidate set is empty after filtering")]
    EmptyCandidates,

    #[error("candidate count exceeds cap ({count} > {cap}); raise --cap to proceed")]
    CapExceeded { count: u128, cap: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
