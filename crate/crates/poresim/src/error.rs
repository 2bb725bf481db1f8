use thiserror::Error;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing baseline (day 0) samples for subject(s): {0}")]
    MissingBaseline(String),

    #[error("day {0} is outside the 0-30 observation range")]
    DayOutOfRange(u32),

    #[error("unsatisfiable warp target: {0}")]
    UnsatisfiableTarget(String),

    #[error(
        "solved warp strength {strength:.6} is outside (-3, 1); \
         for beta = {beta} the admissible area ratio is ({rho_min:.6}, {rho_max:.6})"
    )]
    StrengthOutOfRange {
        strength: f64,
        beta: f64,
        rho_min: f64,
        rho_max: f64,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with a human-readable context line (e.g. the time
    /// window and pore id a simulation step was processing).
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
