//! Demonstration inventory for LLM prompting.
//!
//! Each JSONL record holds an excerpt as `[line_id, text]` pairs and the
//! start line of every item it contains, e.g.
//! `{"lines": [[87, "Item 1. Business"]], "starts": {"1": 87}}`.

use std::collections::BTreeMap;
use std::path::Path;

use itemseg_core::llm::Demonstration;
use itemseg_core::{ItemId, TextLine};
use serde::Deserialize;

use crate::jsonl::{parse_jsonl, FormatError};

pub const MAX_DEMOS: usize = 10;
pub const BUILTIN_DEMOS: &str = include_str!("../data/demos.jsonl");

#[derive(Debug, Clone, Deserialize)]
pub struct DemoRecord {
    pub lines: Vec<(usize, String)>,
    pub starts: BTreeMap<String, usize>,
}

impl DemoRecord {
    pub fn to_demonstration(&self, items: &[ItemId], word_limit: usize) -> Result<Demonstration, FormatError> {
        let bad = |m: String| FormatError::record("demonstration", m);
        let mut starts = BTreeMap::new();
        for (item, &id) in &self.starts {
            let item: ItemId = item.parse().map_err(|_| bad(format!("unknown item {item:?}")))?;
            starts.insert(item, id);
        }
        let excerpt: Vec<TextLine> = self
            .lines
            .iter()
            .map(|(id, t)| TextLine::new(*id, t.as_str()))
            .collect();
        Demonstration::from_excerpt(&excerpt, &starts, items, word_limit).map_err(|e| bad(e.to_string()))
    }
}

fn build(records: Vec<DemoRecord>, items: &[ItemId], word_limit: usize) -> Result<Vec<Demonstration>, FormatError> {
    if records.len() > MAX_DEMOS {
        return Err(FormatError::record(
            "demonstration",
            format!("{} demonstrations given, at most {MAX_DEMOS} allowed", records.len()),
        ));
    }
    records.iter().map(|r| r.to_demonstration(items, word_limit)).collect()
}

pub fn builtin_demos(items: &[ItemId], word_limit: usize) -> Vec<Demonstration> {
    let records = parse_jsonl(BUILTIN_DEMOS, Path::new("demos.jsonl")).expect("built-in demonstrations parse");
    build(records, items, word_limit).expect("built-in demonstrations are valid")
}

pub fn load_demos(path: &Path, items: &[ItemId], word_limit: usize) -> Result<Vec<Demonstration>, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    build(parse_jsonl(&text, path)?, items, word_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use itemseg_core::llm::DEFAULT_ITEMS;

    #[test]
    fn builtin_inventory_is_valid() {
        let demos = builtin_demos(&DEFAULT_ITEMS, 30);
        assert!(!demos.is_empty() && demos.len() <= MAX_DEMOS);
        assert!(demos[0].expected_output.contains("Item 1,87"));
        assert!(demos[0].expected_output.contains("Item 1A,NA"));
        assert!(!demos[1].expected_output.contains("Item 1B"));
    }
}
