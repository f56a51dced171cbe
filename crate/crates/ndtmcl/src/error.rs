use crate::labels::DynamicClassSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("session log is empty")]
    EmptySession,
    #[error("scan timestamps must strictly increase (got {next} after {prev})")]
    OutOfOrder { prev: f64, next: f64 },
    #[error("unsupported dynamic class selection {0}; expected one of {{S,E,D}}, {{S,E}} or {{S}}")]
    UnsupportedSelection(DynamicClassSet),
    #[error("unknown localization method `{0}` (expected baseline, filtered, static or combined)")]
    UnknownMethod(String),
    #[error("unknown map type `{0}` (expected baseline or static)")]
    UnknownMapType(String),
    #[error("trajectory lengths differ ({left} vs {right})")]
    TrajectoryLengthMismatch { left: usize, right: usize },
    #[error("trajectory too short for the requested operation (need at least {need}, got {got})")]
    TrajectoryTooShort { need: usize, got: usize },
    #[error("map extent {map:?} does not cover the session bounds {session:?}")]
    ExtentMismatch { map: [f64; 2], session: [f64; 2] },
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("file truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("point count mismatch: header declares {declared}, frames contain {actual}")]
    CountMismatch { declared: u64, actual: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("configuration parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 input format, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownMethod(_) | Error::UnknownMapType(_) | Error::InvalidConfig(_) => 2,
            Error::BadMagic { .. }
            | Error::VersionMismatch { .. }
            | Error::Truncated { .. }
            | Error::CountMismatch { .. }
            | Error::ConfigParse(_) => 3,
            _ => 4,
        }
    }
}
