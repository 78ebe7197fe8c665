//! JSON Lines interchange files and atomic writes.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use itemseg_core::item::BadLabel;
use itemseg_core::line::number_lines;
use itemseg_core::{spans_to_labels, AnnotatedDocument, ItemId, ItemSpan, LabelError, LineLabel, TextLine};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{doc_id}: {message}")]
    Record { doc_id: String, message: String },
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn record(doc_id: &str, message: impl ToString) -> Self {
        FormatError::Record {
            doc_id: doc_id.to_string(),
            message: message.to_string(),
        }
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Parses one record per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| FormatError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| FormatError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), FormatError> {
    atomic_write(path, to_jsonl(records).as_bytes()).map_err(|e| FormatError::io(path, e))
}

/// A converted filing: `{"doc_id", "lines"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvertedDoc {
    pub doc_id: String,
    pub lines: Vec<String>,
}

impl ConvertedDoc {
    pub fn text_lines(&self) -> Vec<TextLine> {
        number_lines(self.lines.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub item: String,
    pub start_line: usize,
    pub end_line: usize,
}

/// Gold or predicted labels: `{"doc_id", "labels", "lines"?, "spans"?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub doc_id: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<SpanRecord>>,
}

impl LabeledDoc {
    pub fn from_annotated(doc: &AnnotatedDocument, with_text: bool) -> Self {
        LabeledDoc {
            doc_id: doc.doc_id.clone(),
            labels: doc.labels.iter().map(ToString::to_string).collect(),
            lines: with_text.then(|| doc.lines.iter().map(|l| l.text.clone()).collect()),
            spans: None,
        }
    }

    pub fn from_spans(doc_id: &str, spans: &[ItemSpan], n_lines: usize) -> Result<Self, LabelError> {
        let labels = spans_to_labels(spans, n_lines)?;
        Ok(LabeledDoc {
            doc_id: doc_id.to_string(),
            labels: labels.iter().map(ToString::to_string).collect(),
            lines: None,
            spans: Some(
                spans
                    .iter()
                    .map(|s| SpanRecord {
                        item: s.item.to_string(),
                        start_line: s.start_line,
                        end_line: s.end_line,
                    })
                    .collect(),
            ),
        })
    }

    pub fn parsed_labels(&self) -> Result<Vec<LineLabel>, FormatError> {
        self.labels
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|BadLabel(b)| FormatError::record(&self.doc_id, format!("bad label {b:?}")))
            })
            .collect()
    }

    /// Validated document; requires the `lines` field.
    pub fn to_annotated(&self) -> Result<AnnotatedDocument, FormatError> {
        let lines = self
            .lines
            .as_ref()
            .ok_or_else(|| FormatError::record(&self.doc_id, "record has no \"lines\" field"))?;
        AnnotatedDocument::new(
            self.doc_id.clone(),
            number_lines(lines.iter().cloned()),
            self.parsed_labels()?,
        )
        .map_err(|e| FormatError::record(&self.doc_id, e))
    }

    pub fn starts(&self) -> Result<Vec<(ItemId, usize)>, FormatError> {
        let labels = self.parsed_labels()?;
        let spans = itemseg_core::labels_to_spans(&labels).map_err(|e| FormatError::record(&self.doc_id, e))?;
        Ok(spans.iter().map(|s| (s.item, s.start_line)).collect())
    }
}
