//! Filing ingestion: index records, submission unwrapping, text conversion.

pub mod html;
pub mod index;
pub mod sgml;

pub use html::{html_text_lines, html_to_lines, plain_text_lines};
pub use index::{parse_master_index, FilingDate, FilingRef, IndexError};
pub use sgml::{primary_session, unwrap_document_sessions, BodyFormat, DocumentSession, SgmlError};
