use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate observation for entity `{entity}` in year {year}")]
    DuplicateEntityYear { entity: String, year: i32 },
    #[error("panel is empty")]
    EmptyPanel,
    #[error("non-positive value {value} for {entity}/{variable} in {year}")]
    NonPositiveValue {
        entity: String,
        variable: String,
        year: i32,
        value: f64,
    },
    #[error("series too short: need {needed} observations, have {available}")]
    SeriesTooShort { needed: usize, available: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("missing observations for {entity}/{variable} inside the analysis window")]
    IncompleteSeries { entity: String, variable: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("singular regression")]
    SingularRegression,
    #[error("too few rows: {rows} rows for {cols} columns")]
    TooFewRows { rows: usize, cols: usize },
    #[error("too few observations: {0}")]
    TooFewObservations(String),
    #[error(
        "rolling window {window} is too small for a {variables}-variable model: \
         the rolling window must be larger than the number of variables in the model"
    )]
    WindowTooSmall { window: usize, variables: usize },
    #[error("rolling window {window} exceeds the sample length {sample}")]
    WindowExceedsSample { window: usize, sample: usize },
    #[error("quantile solver did not converge after {0} iterations")]
    SolverDiverged(usize),
    #[error("degenerate RMS denominator (N - L = {0})")]
    DegenerateDenominator(i64),
    #[error("singular moment matrix in reduced-rank regression")]
    SingularMomentMatrix,
    #[error("structural quantile VAR needs a variable ordering")]
    OrderingRequired,
    #[error("contemporaneous matrix I - A0 is singular")]
    SingularContemporaneousMatrix,
    #[error("process spec is unstable (spectral radius {0:.4})")]
    UnstableSpec(f64),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
