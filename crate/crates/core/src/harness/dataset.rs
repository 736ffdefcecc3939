use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::model::ProblemDescription;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// Parses JSONL text, one problem per non-blank line.
pub fn parse_dataset(text: &str) -> Result<Vec<ProblemDescription>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| DatasetError::Schema { line: line_no, message };
        let mut de = serde_json::Deserializer::from_str(line);
        let p: ProblemDescription = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let at = e.path().to_string();
            schema(if at == "." { e.into_inner().to_string() } else { format!("at {at}: {}", e.into_inner()) })
        })?;
        if p.text.trim().is_empty() {
            return Err(schema("description is empty".into()));
        }
        if !ids.insert(p.id.clone()) {
            return Err(schema(format!("duplicate id `{}`", p.id)));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<ProblemDescription>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_dataset(&text)
}
