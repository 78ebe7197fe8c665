//! Line-level segmentation of 10-K filings into their numbered items.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece:
//! the item/label model, the text filter and HTML conversion, the rule-based,
//! CRF, Bi-LSTM and LLM-prompting segmenters, evaluation metrics and the
//! synthetic corpus generator. File formats, networking and the CLI live in
//! the `itemseg` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod crf;
pub mod eval;
pub mod ingest;
pub mod item;
pub mod labels;
pub mod line;
pub mod llm;
pub mod lstm;
pub mod optim;
pub mod rules;
pub mod synth;

pub use item::{ItemId, LineLabel};
pub use labels::{
    labels_to_spans, repair_labels, spans_to_labels, validate_label_sequence, AnnotatedDocument, ItemSpan, LabelError,
};
pub use line::{filter_lines, TextLine};
