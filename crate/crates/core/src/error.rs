use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the physical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A film that is stable against breakup cannot produce beads.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate edge {edge}: length {length:e} m")]
    DegenerateEdge { edge: usize, length: f64 },

    #[error("field singularity: evaluation point coincides with the source centre")]
    Singularity,

    #[error("slenderness error: body length {length:e} m must exceed diameter {diameter:e} m")]
    Slenderness { length: f64, diameter: f64 },

    #[error("non-finite {term} force at node {node}")]
    NonFinite { term: &'static str, node: usize },

    #[error("instability at step {step}: speed {speed:e} m/s exceeds 10 m/s")]
    Unstable { step: u64, speed: f64 },

    #[error("at t = {time:e} s: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("unit error: {0}")]
    Unit(String),

    /// Scenario schema violation; `pointer` is a JSON pointer into the file.
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("unknown {kind} '{name}'{}", suggestion_suffix(.suggestions))]
    UnknownName {
        kind: &'static str,
        name: String,
        suggestions: Vec<String>,
    },

    #[error("time step {dt:e} s exceeds the stability limit {limit:e} s")]
    TimeStepTooLarge { dt: f64, limit: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("{0}")]
    Invalid(String),
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {})", suggestions.join(", "))
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
