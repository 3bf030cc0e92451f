use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the simulation models.
#[derive(Debug)]
pub enum Error {
    /// A scalar argument fell outside its permitted range.
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    /// A mathematical domain violation (log of a sub-reference distance, etc).
    Domain(String),
    /// Degenerate or unsupported geometry.
    Geometry(String),
    /// Two points that must differ coincide.
    CoincidentPoints,
    /// An id did not resolve.
    Lookup { kind: &'static str, id: String },
    /// Zero-forcing was asked to separate linearly dependent channels.
    RankDeficient { users: Vec<usize> },
    /// A user channel is identically zero.
    ZeroChannel { user: usize },
    /// Every UE subarray is disabled.
    NoCoverage,
    /// A measurement report is missing the serving tuple or is otherwise inconsistent.
    Integrity(String),
    /// A channel tap lies beyond the unambiguous delay window of the sounder.
    Aliasing { delay_ns: f64, max_ns: f64 },
    UnsupportedOrder(u32),
    /// Not enough distinct data to fit a model.
    DegenerateFit(String),
    EmptyInput(&'static str),
    /// Scenario validation failure naming the offending field and rule.
    Validation { field: String, rule: String },
    Parse { path: PathBuf, message: String },
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            rule: rule.into(),
        }
    }

    /// True for errors caused by user input (bad scenario, bad arguments)
    /// rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Parse { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfRange {
                what,
                value,
                min,
                max,
            } => write!(f, "{what} = {value} outside [{min}, {max}]"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Geometry(msg) => write!(f, "invalid geometry: {msg}"),
            Error::CoincidentPoints => write!(f, "points coincide"),
            Error::Lookup { kind, id } => write!(f, "unknown {kind} `{id}`"),
            Error::RankDeficient { users } => {
                write!(f, "channels are linearly dependent (users {users:?})")
            }
            Error::ZeroChannel { user } => write!(f, "channel of user {user} is zero"),
            Error::NoCoverage => write!(f, "all UE subarrays are disabled"),
            Error::Integrity(msg) => write!(f, "integrity error: {msg}"),
            Error::Aliasing { delay_ns, max_ns } => write!(
                f,
                "tap delay {delay_ns} ns aliases (unambiguous window is {max_ns} ns)"
            ),
            Error::UnsupportedOrder(o) => write!(f, "unsupported PN register length {o}"),
            Error::DegenerateFit(msg) => write!(f, "degenerate fit: {msg}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::Validation { field, rule } => write!(f, "{field}: {rule}"),
            Error::Parse { path, message } => write!(f, "{}: {message}", path.display()),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
