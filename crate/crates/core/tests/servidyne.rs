//! Rule-based segmentation of the reconstructed Servidyne FY2010 excerpt.

use itemseg_core::line::keep_line;
use itemseg_core::rules::segment_rule_based;
use itemseg_core::{spans_to_labels, AnnotatedDocument, ItemId, LineLabel, TextLine};

fn load() -> AnnotatedDocument {
    let raw = include_str!("fixtures/servidyne_2010.jsonl");
    let mut lines = Vec::new();
    let mut labels = Vec::new();
    for row in raw.lines() {
        let v: serde_json::Value = serde_json::from_str(row).unwrap();
        lines.push(TextLine {
            line_id: v["line_id"].as_u64().unwrap() as usize,
            text: v["text"].as_str().unwrap().to_string(),
        });
        labels.push(v["label"].as_str().unwrap().parse::<LineLabel>().unwrap());
    }
    AnnotatedDocument::new("servidyne-2010", lines, labels).unwrap()
}

#[test]
fn fixture_is_consistent() {
    let doc = load();
    assert_eq!(doc.lines.len(), 1780);
    for (i, l) in doc.lines.iter().enumerate() {
        assert_eq!(l.line_id, i);
        assert!(keep_line(&l.text), "{}", l.text);
    }
    assert_eq!(doc.labels[81], LineLabel::B(ItemId::I1));
    assert_eq!(doc.labels[526], LineLabel::B(ItemId::I7));
    assert_eq!(doc.labels[1668], LineLabel::B(ItemId::I9));
    assert_eq!(doc.labels[1670], LineLabel::B(ItemId::I9A));
    assert!(doc.labels[54..=77].iter().all(|l| *l == LineLabel::O));
    assert!(doc.labels[1778..].iter().all(|l| *l == LineLabel::O));
}

#[test]
fn rule_based_finds_body_headings_not_toc() {
    let doc = load();
    let spans = segment_rule_based(&doc.lines);
    let start = |item| spans.iter().find(|s| s.item == item).map(|s| s.start_line);
    assert_eq!(start(ItemId::I1), Some(81));
    assert_eq!(start(ItemId::I7), Some(526));
    assert_eq!(start(ItemId::I9), Some(1668));
    assert_eq!(start(ItemId::I9A), Some(1670));
    let labels = spans_to_labels(&spans, doc.lines.len()).unwrap();
    assert!(labels[54..=77].iter().all(|l| *l == LineLabel::O));
    // every gold item is found at its gold start
    let gold: Vec<(ItemId, usize)> = doc.spans().iter().map(|s| (s.item, s.start_line)).collect();
    let found: Vec<(ItemId, usize)> = spans.iter().map(|s| (s.item, s.start_line)).collect();
    assert_eq!(found, gold);
}
