use thiserror::Error;

/// Failure to turn XML text into a typed protocol document.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed XML: {detail}")]
    MalformedXml { detail: String },
    #[error("element {element} is in namespace {found:?}, expected {expected:?}")]
    WrongNamespace {
        element: String,
        expected: String,
        found: String,
    },
    #[error("invalid {element}: {detail}")]
    InvariantViolation { element: String, detail: String },
}

impl ParseError {
    pub(crate) fn invalid(element: &str, detail: impl Into<String>) -> Self {
        ParseError::InvariantViolation {
            element: element.to_string(),
            detail: detail.into(),
        }
    }
}
