use thiserror::Error;

use crate::geometry::StructureId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // geometry
    #[error("structure {0} has no faces in the mesh")]
    UnknownStructure(StructureId),
    #[error("no ray produced a wall pair (two or more hits)")]
    NoWallPair,
    #[error("ray direction has zero length")]
    DegenerateRay,
    #[error("landmarks are collinear (triangle area {area:.3e} mm^2)")]
    CollinearLandmarks { area: f64 },
    #[error("landmarks coincide (separation {distance:.3e} mm)")]
    CoincidentLandmarks { distance: f64 },
    #[error("structure {0} is not a closed surface")]
    OpenSurface(StructureId),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    // viewgen
    #[error("missing landmark {0}")]
    MissingLandmark(String),
    #[error("blur kernel size must be odd, got {0}")]
    BadKernel(usize),
    #[error("view {view}: {source}")]
    View {
        view: String,
        #[source]
        source: Box<Error>,
    },

    // tensors
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalarLoss(Vec<usize>),
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),

    // networks
    #[error("model expects {expected} views, got {got}")]
    ViewCountMismatch { expected: usize, got: usize },
    #[error("refiner is disabled for this configuration")]
    RefinerDisabled,
    #[error("missing parameter tensor {0}")]
    MissingParam(String),

    // training / evaluation
    #[error("too few cases for a split: {0}")]
    TooFewCases(usize),
    #[error("percentage difference against zero baseline")]
    DivisionByZero,
    #[error("non-finite loss at epoch {epoch}, step {step}: {loss}")]
    NonFiniteLoss { epoch: usize, step: u64, loss: f64 },
    #[error("empty test set: {0}")]
    EmptyTestSet(String),

    // io
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_view(self, view: impl Into<String>) -> Error {
        Error::View { view: view.into(), source: Box::new(self) }
    }
}
