//! Conversions between per-line labels and item spans.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::item::{ItemId, LineLabel};
use crate::line::TextLine;

/// A contiguous, inclusive run of lines belonging to one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemSpan {
    pub item: ItemId,
    pub start_line: usize,
    pub end_line: usize,
}

impl ItemSpan {
    pub fn new(item: ItemId, start_line: usize, end_line: usize) -> Self {
        ItemSpan {
            item,
            start_line,
            end_line,
        }
    }

    pub fn len(&self) -> usize {
        self.end_line + 1 - self.start_line
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("line {position}: {label} does not continue a run of the same item")]
    OrphanInside { position: usize, label: LineLabel },
    #[error("line {position}: item {item} begins a second time")]
    DuplicateBegin { position: usize, item: ItemId },
    #[error("span for item {item} ({start}..={end}) is inverted or past the last line")]
    SpanOutOfRange { item: ItemId, start: usize, end: usize },
    #[error("spans for items {first} and {second} overlap")]
    Overlap { first: ItemId, second: ItemId },
    #[error("item {0} has more than one span")]
    DuplicateSpan(ItemId),
    #[error("{lines} lines but {labels} labels")]
    LengthMismatch { lines: usize, labels: usize },
}

/// Checks the modified-BIO grammar: every `I(x)` follows `B(x)` or `I(x)`,
/// and no item begins twice. Reports the first violation.
pub fn validate_label_sequence(labels: &[LineLabel]) -> Result<(), LabelError> {
    let mut begun = [false; ItemId::ALL.len()];
    let mut prev = LineLabel::O;
    for (position, &label) in labels.iter().enumerate() {
        match label {
            LineLabel::O => {}
            LineLabel::B(item) => {
                if core::mem::replace(&mut begun[item.ordinal()], true) {
                    return Err(LabelError::DuplicateBegin { position, item });
                }
            }
            LineLabel::I(item) => {
                if prev.item() != Some(item) {
                    return Err(LabelError::OrphanInside { position, label });
                }
            }
        }
        prev = label;
    }
    Ok(())
}

/// One span per `B` run, sorted by start line.
pub fn labels_to_spans(labels: &[LineLabel]) -> Result<Vec<ItemSpan>, LabelError> {
    validate_label_sequence(labels)?;
    let mut spans: Vec<ItemSpan> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match label {
            LineLabel::B(item) => spans.push(ItemSpan::new(item, i, i)),
            LineLabel::I(_) => {
                // validated: the last span is this run
                if let Some(span) = spans.last_mut() {
                    span.end_line = i;
                }
            }
            LineLabel::O => {}
        }
    }
    Ok(spans)
}

/// Inverse of [`labels_to_spans`]; uncovered lines are `O`.
pub fn spans_to_labels(spans: &[ItemSpan], n_lines: usize) -> Result<Vec<LineLabel>, LabelError> {
    let mut seen = [false; ItemId::ALL.len()];
    let mut sorted: Vec<ItemSpan> = spans.to_vec();
    sorted.sort_by_key(|s| s.start_line);
    for span in &sorted {
        if span.start_line > span.end_line || span.end_line >= n_lines {
            return Err(LabelError::SpanOutOfRange {
                item: span.item,
                start: span.start_line,
                end: span.end_line,
            });
        }
        if core::mem::replace(&mut seen[span.item.ordinal()], true) {
            return Err(LabelError::DuplicateSpan(span.item));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].start_line <= pair[0].end_line {
            return Err(LabelError::Overlap {
                first: pair[0].item,
                second: pair[1].item,
            });
        }
    }
    let mut labels = vec![LineLabel::O; n_lines];
    for span in &sorted {
        labels[span.start_line] = LineLabel::B(span.item);
        for label in &mut labels[span.start_line + 1..=span.end_line] {
            *label = LineLabel::I(span.item);
        }
    }
    Ok(labels)
}

/// Turns an arbitrary decoded label sequence into a valid one.
///
/// An `I(x)` that does not continue a run of `x` becomes `B(x)`. When an item
/// then begins more than once, its longest run is kept (the later run on a
/// tie) and the other runs are relabeled `O`.
pub fn repair_labels(labels: &[LineLabel]) -> Vec<LineLabel> {
    let mut out: Vec<LineLabel> = Vec::with_capacity(labels.len());
    let mut prev = LineLabel::O;
    for &label in labels {
        let fixed = match label {
            LineLabel::I(item) if prev.item() != Some(item) => LineLabel::B(item),
            other => other,
        };
        out.push(fixed);
        prev = fixed;
    }

    // (start, len) of the run to keep for each item
    let mut keep: [Option<(usize, usize)>; ItemId::ALL.len()] = [None; ItemId::ALL.len()];
    let mut runs: Vec<(ItemId, usize, usize)> = Vec::new();
    let mut i = 0;
    while i < out.len() {
        if let LineLabel::B(item) = out[i] {
            let mut end = i + 1;
            while end < out.len() && out[end] == LineLabel::I(item) {
                end += 1;
            }
            let len = end - i;
            runs.push((item, i, len));
            let slot = &mut keep[item.ordinal()];
            if slot.is_none_or(|(_, best)| len >= best) {
                *slot = Some((i, len));
            }
            i = end;
        } else {
            i += 1;
        }
    }
    for (item, start, len) in runs {
        if keep[item.ordinal()] != Some((start, len)) {
            for label in &mut out[start..start + len] {
                *label = LineLabel::O;
            }
        }
    }
    out
}

/// Keeps the largest subset of `(line, item)` starts whose items strictly
/// increase in canonical order as lines increase. Input must be sorted by
/// line; ties among equally large subsets favor earlier entries.
pub fn order_filter(starts: &[(usize, ItemId)]) -> Vec<(usize, ItemId)> {
    let n = starts.len();
    if n == 0 {
        return Vec::new();
    }
    // longest chain ending at each index, O(n^2) is fine for <= a few dozen starts
    let mut best = vec![1usize; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        for i in 0..j {
            if starts[i].0 < starts[j].0 && starts[i].1 < starts[j].1 && best[i] + 1 > best[j] {
                best[j] = best[i] + 1;
                parent[j] = Some(i);
            }
        }
    }
    let mut tail = 0;
    for j in 1..n {
        if best[j] > best[tail] {
            tail = j;
        }
    }
    let mut chain = Vec::with_capacity(best[tail]);
    let mut cur = Some(tail);
    while let Some(j) = cur {
        chain.push(starts[j]);
        cur = parent[j];
    }
    chain.reverse();
    chain
}

/// Builds contiguous spans from item start lines: each item runs up to the
/// line before the next start, the last one to the final line.
pub fn spans_from_starts(starts: &[(usize, ItemId)], n_lines: usize) -> Vec<ItemSpan> {
    let mut spans = Vec::with_capacity(starts.len());
    for (k, &(line, item)) in starts.iter().enumerate() {
        let end = match starts.get(k + 1) {
            Some(&(next, _)) => next - 1,
            None => n_lines - 1,
        };
        spans.push(ItemSpan::new(item, line, end));
    }
    spans
}

/// Lines of one filing together with their gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDocument {
    pub doc_id: alloc::string::String,
    pub lines: Vec<TextLine>,
    pub labels: Vec<LineLabel>,
}

impl AnnotatedDocument {
    pub fn new(
        doc_id: impl Into<alloc::string::String>,
        lines: Vec<TextLine>,
        labels: Vec<LineLabel>,
    ) -> Result<Self, LabelError> {
        if lines.len() != labels.len() {
            return Err(LabelError::LengthMismatch {
                lines: lines.len(),
                labels: labels.len(),
            });
        }
        validate_label_sequence(&labels)?;
        Ok(AnnotatedDocument {
            doc_id: doc_id.into(),
            lines,
            labels,
        })
    }

    pub fn spans(&self) -> Vec<ItemSpan> {
        labels_to_spans(&self.labels).expect("validated at construction")
    }
}
