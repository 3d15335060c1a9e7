use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the SPDH library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("point is behind the camera (Z = {0} mm)")]
    BehindCamera(f64),

    #[error("invalid normalization bounds on axis {axis}: lower {lower} >= upper {upper}")]
    InvalidBounds { axis: usize, lower: f64, upper: f64 },

    #[error("invalid quantization: {0}")]
    InvalidQuantization(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("joint {name:?} has non-finite coordinates")]
    NonFiniteJoint { name: String },

    #[error("stack shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid kinematic chain: {0}")]
    InvalidChain(String),

    #[error("joint {name:?} angle {value} rad outside limits [{lo}, {hi}]")]
    JointLimit {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("expected {expected} joint angles, got {got}")]
    AngleCount { expected: usize, got: usize },

    #[error("transform is not rigid: {0}")]
    NonRigid(String),

    #[error("joint sets do not match: {0}")]
    JointMismatch(String),

    #[error("no joints to evaluate")]
    EmptyEvaluation,

    #[error("frame id mismatch: {0}")]
    FrameMismatch(String),

    #[error("missing manifest in {0}")]
    MissingManifest(PathBuf),

    #[error("{path}:{line}: {message}")]
    Annotation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    PngDecode(#[from] png::DecodingError),

    #[error(transparent)]
    PngEncode(#[from] png::EncodingError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}
