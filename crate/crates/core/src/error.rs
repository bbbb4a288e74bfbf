use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("negative budget {budget} for node '{node}' at {location}")]
    NegativeBudget {
        node: String,
        budget: f64,
        location: String,
    },
    #[error("duplicate edge between '{u}' and '{v}' at {location}")]
    DuplicateEdge {
        u: String,
        v: String,
        location: String,
    },
    #[error("duplicate id '{id}' at {location}")]
    DuplicateId { id: String, location: String },
    #[error("self-loop on node '{node}' at {location}")]
    SelfLoop { node: String, location: String },
    #[error("unknown node '{node}' at {location}")]
    UnknownNode { node: String, location: String },
    #[error("unknown edge '{edge}' at {location}")]
    UnknownEdge { edge: String, location: String },
    #[error("non-monotone breakpoints at {location}: {message}")]
    NonMonotoneBreakpoints { location: String, message: String },
    #[error("invalid parameter at {location}: {message}")]
    InvalidParameter { location: String, message: String },
    #[error("edge '{edge}' is not incident to node '{node}'")]
    NotIncident { node: String, edge: String },
    #[error("infeasible profile: node '{node}' uses {used} of budget {budget}")]
    Infeasible { node: String, used: f64, budget: f64 },
    #[error("nodes '{u}' and '{v}' are not adjacent")]
    NotAdjacent { u: String, v: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("grid enumeration needs {required:.0} profiles but the cap is {cap}")]
    GridCap { required: f64, cap: u64 },
    #[error("refused: {0}")]
    Refused(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed CNF: {0}")]
    Cnf(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            location: location.into(),
            message: message.into(),
        }
    }
}
