//! File formats, EDGAR access, LLM backends and the batch CLI around
//! `itemseg-core`.

pub mod audit;
pub mod backend;
pub mod cli;
pub mod config;
pub mod demos;
pub mod edgar;
pub mod embeddings;
pub mod jsonl;
pub mod model_io;
pub mod report;

pub use itemseg_core as core;
