//! `<DOCUMENT>` blocks of a raw EDGAR submission file.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyFormat {
    Html,
    PlainText,
}

/// One `<DOCUMENT>` block: the main filing or an exhibit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentSession {
    pub doc_type: String,
    pub filename: String,
    pub body: String,
    pub body_format: BodyFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SgmlError {
    #[error("no <DOCUMENT> blocks found")]
    NoDocuments,
    #[error("<DOCUMENT> block at byte {offset} is not terminated")]
    Unterminated { offset: usize },
    #[error("<DOCUMENT> block at byte {offset} has an empty body")]
    EmptyBody { offset: usize },
}

const OPEN: &str = "<DOCUMENT>";
const CLOSE: &str = "</DOCUMENT>";

fn header_value<'a>(block: &'a str, tag: &str) -> Option<&'a str> {
    let at = block.find(tag)?;
    let rest = &block[at + tag.len()..];
    let end = rest.find(['\n', '\r', '<']).unwrap_or(rest.len());
    Some(rest[..end].trim())
}

fn looks_like_html(body: &str) -> bool {
    let mut head = body.trim_start();
    // inline XBRL wraps the page in <XBRL> and an XML prologue
    for prefix in ["<XBRL>", "<xbrl>"] {
        if let Some(rest) = head.strip_prefix(prefix) {
            head = rest.trim_start();
        }
    }
    if head.starts_with("<?xml") {
        if let Some(end) = head.find("?>") {
            head = head[end + 2..].trim_start();
        }
    }
    let probe: String = head.chars().take(15).collect::<String>().to_ascii_lowercase();
    probe.starts_with("<html") || probe.starts_with("<!doctype html")
}

fn is_html_filename(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.ends_with(".htm") || lower.ends_with(".html")
}

/// Splits a submission into its document blocks, in file order.
pub fn unwrap_document_sessions(raw_sgml: &str) -> Result<Vec<DocumentSession>, SgmlError> {
    let mut sessions = Vec::new();
    let mut cursor = 0;
    while let Some(rel) = raw_sgml[cursor..].find(OPEN) {
        let offset = cursor + rel;
        let inner_start = offset + OPEN.len();
        let Some(close_rel) = raw_sgml[inner_start..].find(CLOSE) else {
            return Err(SgmlError::Unterminated { offset });
        };
        let inner_end = inner_start + close_rel;
        // a nested <DOCUMENT> before our close means ours was never closed
        if raw_sgml[inner_start..inner_end].contains(OPEN) {
            return Err(SgmlError::Unterminated { offset });
        }
        let block = &raw_sgml[inner_start..inner_end];

        let doc_type = header_value(block, "<TYPE>").unwrap_or_default().to_string();
        let filename = header_value(block, "<FILENAME>").unwrap_or_default().to_string();
        let body = match block.find("<TEXT>") {
            Some(t) => {
                let after = &block[t + "<TEXT>".len()..];
                match after.rfind("</TEXT>") {
                    Some(e) => &after[..e],
                    None => after,
                }
            }
            None => block,
        };
        let body = body.trim_matches(|c| c == '\n' || c == '\r');
        if body.trim().is_empty() {
            return Err(SgmlError::EmptyBody { offset });
        }
        let body_format = if is_html_filename(&filename) || looks_like_html(body) {
            BodyFormat::Html
        } else {
            BodyFormat::PlainText
        };
        sessions.push(DocumentSession {
            doc_type,
            filename,
            body: body.to_string(),
            body_format,
        });
        cursor = inner_end + CLOSE.len();
    }
    if sessions.is_empty() {
        return Err(SgmlError::NoDocuments);
    }
    Ok(sessions)
}

/// The first session whose type is one of `form_types`.
pub fn primary_session<'a>(sessions: &'a [DocumentSession], form_types: &[&str]) -> Option<&'a DocumentSession> {
    sessions
        .iter()
        .find(|s| form_types.iter().any(|f| s.doc_type.eq_ignore_ascii_case(f)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(kind: &str, file: &str, body: &str) -> String {
        alloc::format!(
            "<DOCUMENT>\n<TYPE>{kind}\n<SEQUENCE>1\n<FILENAME>{file}\n<TEXT>\n{body}\n</TEXT>\n</DOCUMENT>\n"
        )
    }

    #[test]
    fn single_block() {
        let raw = alloc::format!(
            "<SEC-HEADER>\n</SEC-HEADER>\n{}",
            block("10-K", "a.txt", "ITEM 1. BUSINESS")
        );
        let sessions = unwrap_document_sessions(&raw).unwrap();
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].doc_type, "10-K");
        assert_eq!(sessions[0].body, "ITEM 1. BUSINESS");
        assert_eq!(sessions[0].body_format, BodyFormat::PlainText);
    }

    #[test]
    fn preserves_order_and_detects_html() {
        let raw = [
            block("10-K", "main.htm", "<p>x</p>"),
            block("EX-21", "ex21.txt", "<html><body>subs</body></html>"),
        ]
        .concat();
        let sessions = unwrap_document_sessions(&raw).unwrap();
        assert_eq!(
            sessions.iter().map(|s| s.doc_type.as_str()).collect::<Vec<_>>(),
            ["10-K", "EX-21"]
        );
        assert_eq!(sessions[0].body_format, BodyFormat::Html);
        assert_eq!(sessions[1].body_format, BodyFormat::Html);
        assert_eq!(primary_session(&sessions, &["10-K"]).unwrap().filename, "main.htm");
    }

    #[test]
    fn errors() {
        assert_eq!(unwrap_document_sessions("<SEC-HEADER>"), Err(SgmlError::NoDocuments));
        let raw = "xx<DOCUMENT>\n<TYPE>10-K\n<TEXT>\nbody";
        assert_eq!(
            unwrap_document_sessions(raw),
            Err(SgmlError::Unterminated { offset: 2 })
        );
        let raw = alloc::format!("<DOCUMENT>\n<TYPE>10-K\n<TEXT>\nbody\n{}", block("EX-1", "e.txt", "b"));
        assert_eq!(
            unwrap_document_sessions(&raw),
            Err(SgmlError::Unterminated { offset: 0 })
        );
    }
}
