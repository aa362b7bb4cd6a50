use thiserror::Error;

/// Errors raised anywhere in the reconstruction and forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid domain polygon: {0}")]
    InvalidDomain(String),

    #[error("every triangle was removed while clipping the mesh")]
    EmptyMesh,

    #[error("station {index} at ({x}, {y}) does not coincide with any mesh vertex")]
    StationNotOnMesh { index: usize, x: f64, y: f64 },

    #[error("point ({x}, {y}) lies outside the triangulated domain")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("surfaces are defined on different meshes")]
    MeshMismatch,

    #[error("singular smoothing system: {0}")]
    SingularSystem(String),

    #[error("GCV undefined at lambda = {lambda}: trace of the smoother is {trace} for {n} observations")]
    DegenerateGcv { lambda: f64, trace: f64, n: usize },

    #[error("GCV is degenerate at every grid point")]
    AllPointsDegenerate,

    #[error("mass matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("requested {requested} components but at most {max} are available")]
    TooManyComponents { requested: usize, max: usize },

    #[error("VAR regressors are rank deficient (lag order {p}, {factors} factors, {rows} usable rows)")]
    RankDeficientRegressors { p: usize, factors: usize, rows: usize },

    #[error("insufficient history: need {needed} observations, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("no grid point of the information criterion could be fitted")]
    GridInfeasible,

    #[error("FAR truncation too large: eigenvalue {index} is {value:e}, below tolerance {tolerance:e}")]
    TruncationTooLarge { index: usize, value: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error in {file}: {message}")]
    SchemaError { file: String, message: String },

    #[error("duplicate record for date {date}, station {station}")]
    DuplicateRecord { date: String, station: String },

    #[error("no station has a complete measurement record")]
    NoCompleteStations,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::InvalidMesh(_) => "InvalidMesh",
            Error::InvalidDomain(_) => "InvalidDomain",
            Error::EmptyMesh => "EmptyMesh",
            Error::StationNotOnMesh { .. } => "StationNotOnMesh",
            Error::PointOutsideDomain { .. } => "PointOutsideDomain",
            Error::MeshMismatch => "MeshMismatch",
            Error::SingularSystem(_) => "SingularSystem",
            Error::DegenerateGcv { .. } => "DegenerateGcv",
            Error::AllPointsDegenerate => "AllPointsDegenerate",
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::TooManyComponents { .. } => "TooManyComponents",
            Error::RankDeficientRegressors { .. } => "RankDeficientRegressors",
            Error::InsufficientHistory { .. } => "InsufficientHistory",
            Error::GridInfeasible => "GridInfeasible",
            Error::TruncationTooLarge { .. } => "TruncationTooLarge",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::SchemaError { .. } => "SchemaError",
            Error::DuplicateRecord { .. } => "DuplicateRecord",
            Error::NoCompleteStations => "NoCompleteStations",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
