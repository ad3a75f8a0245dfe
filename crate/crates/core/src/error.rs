use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bearing is undefined for a target at the sensor origin")]
    BearingUndefined,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("innovation covariance is degenerate (condition number {0:e})")]
    DegenerateInnovation(f64),

    #[error("elementary symmetric function input must be nonnegative, got {0}")]
    NegativeEsfInput(f64),

    #[error("updated cardinality distribution has no support")]
    CardinalityDegenerate,

    #[error("all resampling weights are zero")]
    ZeroWeights,

    #[error("no measurement is explainable by the predicted intensity")]
    NoExplainableMeasurement,

    #[error("prediction needs either prior mass or birth mass")]
    EmptyPrediction,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
