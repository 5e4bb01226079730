use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlowError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("configuration error at `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("at x={x:.17e} ({kind}): {source}")]
    Event {
        x: f64,
        kind: String,
        #[source]
        source: Box<FlowError>,
    },
}

pub type Result<T> = std::result::Result<T, FlowError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(FlowError::Domain(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(FlowError::Numerical(msg.into()))
}

pub(crate) fn config_err(field: &str, msg: impl Into<String>) -> FlowError {
    FlowError::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}
