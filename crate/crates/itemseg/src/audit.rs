//! Append-only JSON Lines audit log of LLM exchanges.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use itemseg_core::llm::{AuditEntry, AuditSink};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct AuditRecord {
    pub doc_id: String,
    pub attempt: usize,
    pub prompt_sha256: String,
    pub response: Option<String>,
    pub verdict: String,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl AuditRecord {
    pub fn from_entry(entry: &AuditEntry<'_>) -> Self {
        AuditRecord {
            doc_id: entry.doc_id.to_string(),
            attempt: entry.attempt,
            prompt_sha256: sha256_hex(entry.prompt),
            response: entry.response.ok().map(str::to_string),
            verdict: entry.verdict.clone(),
        }
    }
}

/// Shared handle; every record is written and flushed under one lock.
#[derive(Clone)]
pub struct AuditLog {
    out: Arc<Mutex<BufWriter<File>>>,
}

impl AuditLog {
    pub fn append(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog {
            out: Arc::new(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn write(&self, record: &AuditRecord) -> io::Result<()> {
        let mut line = serde_json::to_string(record).expect("audit records serialize");
        line.push('\n');
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        out.write_all(line.as_bytes())?;
        out.flush()
    }
}

impl AuditSink for AuditLog {
    fn record(&mut self, entry: &AuditEntry<'_>) {
        if let Err(e) = self.write(&AuditRecord::from_entry(entry)) {
            log::error!("audit log write failed: {e}");
        }
    }
}
