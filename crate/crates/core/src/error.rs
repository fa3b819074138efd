use thiserror::Error;

use crate::constraints::EdgeRef;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("line coefficients (a1, a2) must not both be zero")]
    DegenerateLine,
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("degenerate polygon (area {area:e})")]
    Degenerate { area: f64 },
    #[error("polygon is not convex at vertex {0}")]
    NotConvex(usize),
    #[error("repeated vertex at index {0}")]
    DuplicateVertex(usize),
    #[error("vertices are ordered counterclockwise")]
    CounterClockwise,
    #[error("all points are collinear")]
    Collinear,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// Three lines (nearly) concurrent or two nodes closer than the genericity threshold.
    #[error("non-generic configuration: lines {lines:?} meet within {separation:e}")]
    NonGeneric { lines: [usize; 3], separation: f64 },
    #[error("cut {0} does not cross the shape interior")]
    CutMissesShape(usize),
    #[error("noise failed on piece {piece} after {retries} retries")]
    NoiseFailed { piece: usize, retries: usize },
    #[error("gave up after {0} resampling attempts")]
    TooManyAttempts(usize),
    #[error("invalid noise level xi = {0} (need 0 <= xi < 1)")]
    InvalidNoise(f64),
    #[error("face extraction failed: {0}")]
    Faces(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatingError {
    #[error("mating joins two edges of the same piece {0}")]
    SamePiece(usize),
    #[error("edge {0} is used by more than one mating")]
    SharedEdge(EdgeRef),
    #[error("edge {0} does not exist")]
    BadEdge(EdgeRef),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Mating(#[from] MatingError),
    #[error("simulation state became non-finite at step {step} (body {body})")]
    NonFinite { step: usize, body: usize },
    #[error("no bodies to simulate")]
    Empty,
    #[error("invalid relaxation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("non-generic instance: edge {edge} has {count} exact candidates")]
    Ambiguous { edge: EdgeRef, count: usize },
    #[error("inconsistent reconstruction at edge {0}")]
    Inconsistent(EdgeRef),
    #[error("puzzle has no pieces")]
    Empty,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Mating(#[from] MatingError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("alignment underdetermined: {0} distinct correspondence points")]
    Underdetermined(usize),
    #[error("piece ids not present in the puzzle: {0:?}")]
    UnknownPieces(Vec<usize>),
    #[error("bundle has no ground truth")]
    NoGroundTruth,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: String, expected: String },
    #[error("invalid field {path}: {msg}")]
    Invalid { path: String, msg: String },
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}
