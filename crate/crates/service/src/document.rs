//! Versioned JSON design documents.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use seqtrial_core::trial_engine::TrialDesign;

pub const SCHEMA_VERSION: u32 = 1;

/// The JSON Schema shipped for design documents.
pub const DESIGN_SCHEMA: &str = include_str!("../schema/design.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDocument {
    pub schema_version: u32,
    pub design: TrialDesign,
}

impl DesignDocument {
    pub fn new(design: TrialDesign) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            design,
        }
    }
}

/// A document that failed to parse or validate, anchored to a field path
/// and, where known, a line and column of the source text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for DocumentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if !self.path.is_empty() && self.path != "." {
            write!(f, "{}: ", self.path)?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for DocumentError {}

/// Deserializes `text`, reporting the failing field path.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, DocumentError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        DocumentError {
            path,
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: strip_position(&inner.to_string()),
        }
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// First line of `text` that mentions the JSON key `key`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Turns a design validation message (which starts with the offending
/// field) into a located error.
pub fn validation_error(text: Option<&str>, message: String) -> DocumentError {
    let field = message
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_end_matches(':')
        .to_string();
    let leaf = field.rsplit('.').next().unwrap_or("").to_string();
    DocumentError {
        path: format!("design.{field}"),
        line: text.and_then(|t| line_of_key(t, &leaf)),
        column: None,
        message,
    }
}

/// Parses and validates a design document.
pub fn parse_design(text: &str) -> Result<TrialDesign, DocumentError> {
    let doc: DesignDocument = parse_json(text)?;
    check_document(&doc, Some(text))?;
    Ok(doc.design)
}

pub fn check_document(doc: &DesignDocument, text: Option<&str>) -> Result<(), DocumentError> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(DocumentError {
            path: "schema_version".into(),
            line: text.and_then(|t| line_of_key(t, "schema_version")),
            column: None,
            message: format!("unsupported schema version {} (expected {SCHEMA_VERSION})", doc.schema_version),
        });
    }
    doc.design.validate().map_err(|e| {
        let msg = match e {
            seqtrial_core::Error::Config(m) => m,
            other => other.to_string(),
        };
        validation_error(text, msg)
    })
}
