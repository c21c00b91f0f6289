use std::fmt::Display;
use std::path::Path;

use nlqd_core::{Error, ErrorClass};
use serde_json::json;

#[derive(Debug)]
pub struct CliError {
    pub tag: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { tag: "usage", message: message.into(), code: 1 }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self { tag: "schema", message: message.into(), code: 1 }
    }

    pub fn io(path: impl AsRef<Path>, e: impl Display) -> Self {
        Self { tag: "io", message: format!("{}: {e}", path.as_ref().display()), code: 1 }
    }

    pub fn criterion(message: impl Into<String>) -> Self {
        Self { tag: "criterion_failed", message: message.into(), code: 3 }
    }

    pub fn record(&self) -> String {
        json!({ "error": self.tag, "message": self.message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Validation => 1,
            ErrorClass::Numerical => 2,
        };
        Self { tag: e.tag(), message: e.to_string(), code }
    }
}
