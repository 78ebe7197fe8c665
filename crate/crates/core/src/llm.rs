//! Line-ID-based prompting: number the lines, ask a chat model for the
//! line id where each item begins, validate the answer, rebuild spans.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::Range;

use thiserror::Error;

use crate::item::ItemId;
use crate::labels::{order_filter, spans_from_starts, ItemSpan};
use crate::line::TextLine;

/// Items requested by default, as in the reference prompt.
pub const DEFAULT_ITEMS: [ItemId; 18] = {
    use ItemId::*;
    [
        I1, I1A, I2, I3, I4, I5, I6, I7, I7A, I8, I9, I9A, I10, I11, I12, I13, I14, I15,
    ]
};

pub const FENCE: &str = "=====";

/// A document rendered as `"<id> <first L words>"` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibReport {
    pub lines: Vec<(usize, String)>,
    pub truncation_limit: usize,
}

impl LibReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (id, text) in &self.lines {
            if text.is_empty() {
                let _ = writeln!(out, "{id}");
            } else {
                let _ = writeln!(out, "{id} {text}");
            }
        }
        out
    }

    pub fn issued_ids(&self) -> Range<usize> {
        0..self.lines.len()
    }
}

fn first_words(text: &str, limit: usize) -> String {
    let mut out = String::new();
    for (k, w) in text.split_whitespace().take(limit).enumerate() {
        if k > 0 {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

/// Numbers lines 0.. in order and keeps the first `limit` words of each.
pub fn format_lib_report(lines: &[TextLine], limit: usize) -> LibReport {
    let limit = limit.max(1);
    LibReport {
        lines: lines
            .iter()
            .enumerate()
            .map(|(i, l)| (i, first_words(&l.text, limit)))
            .collect(),
        truncation_limit: limit,
    }
}

/// A partial report and the answer expected for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demonstration {
    pub excerpt: String,
    pub expected_output: String,
}

impl Demonstration {
    /// Builds a demonstration from an excerpt whose lines keep their ids in
    /// the full report; `starts` maps items to those ids.
    pub fn from_excerpt(
        excerpt: &[TextLine],
        starts: &BTreeMap<ItemId, usize>,
        items: &[ItemId],
        limit: usize,
    ) -> Result<Self, LlmError> {
        for (&item, &id) in starts {
            if !excerpt.iter().any(|l| l.line_id == id) {
                return Err(LlmError::Demonstration(format!(
                    "{item} starts at line {id}, which is not in the excerpt"
                )));
            }
        }
        let mut text = String::new();
        for l in excerpt {
            let words = first_words(&l.text, limit.max(1));
            let _ = writeln!(text, "{} {words}", l.line_id);
        }
        let response = LibResponse {
            assignments: items.iter().map(|i| (*i, starts.get(i).copied())).collect(),
        };
        Ok(Demonstration {
            excerpt: text,
            expected_output: render_response(&response, items),
        })
    }
}

/// Parsed answer: for every requested item, its start line id or `None` (NA).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibResponse {
    pub assignments: BTreeMap<ItemId, Option<usize>>,
}

/// Why a response was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("no item rows found")]
    NoRows,
    #[error("{item}: line id {value:?} is not an integer")]
    NonInteger { item: ItemId, value: String },
    #[error("{item}: line id {id} was not issued")]
    NotIssued { item: ItemId, id: usize },
    #[error("{0} listed more than once")]
    Duplicate(ItemId),
    #[error("{0} missing from the answer")]
    Missing(ItemId),
    #[error("unexpected item {0:?}")]
    Unexpected(String),
}

fn item_list(items: &[ItemId]) -> String {
    let names: Vec<String> = items.iter().map(|i| format!("Item {i}")).collect();
    names.join(", ")
}

/// The prompt text. Demonstrations and the report are each fenced by `=====`.
pub fn build_prompt(report: &LibReport, demos: &[Demonstration], items: &[ItemId]) -> String {
    let mut p = String::new();
    p.push_str("I am an excellent financial professional. The task is to identify the starting lines of items in 10-K report.\n");
    p.push_str("A 10-K report may contain the following items:\n");
    for item in ItemId::ALL {
        let _ = writeln!(p, "Item {item}. {}", item.title());
    }
    p.push_str("Each item may start with a title, followed by the content. Each line contains a line ID, followed by its content. ");
    let _ = writeln!(
        p,
        "Extract the line ID of {}. If the item is not available, print NA.",
        item_list(items)
    );
    p.push_str("The beginning of a report may contain a table of contents that also lists the item heading but is irrelevant.\n");
    if !demos.is_empty() {
        p.push_str("\nBelow are some examples.\n");
        for (k, d) in demos.iter().enumerate() {
            let _ = write!(p, "\nExample {}:\n{FENCE}\n{}", k + 1, d.excerpt);
            if !d.excerpt.ends_with('\n') {
                p.push('\n');
            }
            let _ = writeln!(p, "{FENCE}\nOutput:\n{}", d.expected_output.trim_end());
        }
    }
    p.push_str("\nThe Task:\nBelow is a 10-K report.\n");
    p.push_str(
        "List the result in a table format. The first column is the item ID. The second column is the Line ID. ",
    );
    p.push_str("Use comma (\",\") to separate the two columns. Include no additional white space.\n");
    let _ = write!(p, "{FENCE}\n{}{FENCE}\nOutput:\n", report.render());
    p
}

/// Rows `Item X,<id|NA>` for every requested item, in the given order.
pub fn render_response(response: &LibResponse, items: &[ItemId]) -> String {
    let mut out = String::new();
    for item in items {
        match response.assignments.get(item).copied().flatten() {
            Some(id) => {
                let _ = writeln!(out, "Item {item},{id}");
            }
            None => {
                let _ = writeln!(out, "Item {item},NA");
            }
        }
    }
    out
}

/// Extracts and validates `Item X,Y` rows, ignoring any other text.
pub fn parse_response(text: &str, issued: Range<usize>, items: &[ItemId]) -> Result<LibResponse, Vec<Rejection>> {
    let mut reasons = Vec::new();
    let mut assignments: BTreeMap<ItemId, Option<usize>> = BTreeMap::new();
    let mut rows = 0;
    for raw in text.lines() {
        let line = raw.trim().trim_matches('`').trim();
        let Some((left, right)) = line.split_once(',') else {
            continue;
        };
        let left = left.trim();
        if !left.get(..5).is_some_and(|p| p.eq_ignore_ascii_case("item ")) {
            continue;
        }
        let name = left[5..].trim().trim_end_matches('.');
        let value = right.trim();
        if name.eq_ignore_ascii_case("id") {
            continue;
        }
        rows += 1;
        let Some(item) = ItemId::parse_loose(name).filter(|i| items.contains(i)) else {
            reasons.push(Rejection::Unexpected(left.to_string()));
            continue;
        };
        let parsed = if value.eq_ignore_ascii_case("na") {
            None
        } else {
            match value.parse::<usize>() {
                Ok(id) if issued.contains(&id) => Some(id),
                Ok(id) => {
                    reasons.push(Rejection::NotIssued { item, id });
                    continue;
                }
                Err(_) => {
                    reasons.push(Rejection::NonInteger {
                        item,
                        value: value.to_string(),
                    });
                    continue;
                }
            }
        };
        if assignments.insert(item, parsed).is_some() {
            reasons.push(Rejection::Duplicate(item));
        }
    }
    if rows == 0 {
        return Err(alloc::vec![Rejection::NoRows]);
    }
    for item in items {
        if !assignments.contains_key(item) && !reasons.iter().any(|r| rejection_item(r) == Some(*item)) {
            reasons.push(Rejection::Missing(*item));
        }
    }
    if reasons.is_empty() {
        Ok(LibResponse { assignments })
    } else {
        Err(reasons)
    }
}

fn rejection_item(r: &Rejection) -> Option<ItemId> {
    match r {
        Rejection::NonInteger { item, .. } | Rejection::NotIssued { item, .. } => Some(*item),
        Rejection::Duplicate(item) | Rejection::Missing(item) => Some(*item),
        Rejection::NoRows | Rejection::Unexpected(_) => None,
    }
}

/// Spans from accepted start ids: sorted by line, order-filtered, each item
/// running to the line before the next start and the last to `n_lines - 1`.
pub fn spans_from_assignments(response: &LibResponse, n_lines: usize) -> Vec<ItemSpan> {
    let mut starts: Vec<(usize, ItemId)> = response
        .assignments
        .iter()
        .filter_map(|(&item, &id)| id.filter(|&i| i < n_lines).map(|i| (i, item)))
        .collect();
    starts.sort();
    // two items on one line cannot both start there; keep the earlier item
    starts.dedup_by_key(|s| s.0);
    spans_from_starts(&order_filter(&starts), n_lines)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct BackendError {
    pub message: String,
    /// Timeouts and transient failures consume an attempt; others abort.
    pub retriable: bool,
}

pub trait ChatBackend {
    fn send(&mut self, prompt: &str) -> Result<String, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &mut T {
    fn send(&mut self, prompt: &str) -> Result<String, BackendError> {
        (**self).send(prompt)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn send(&mut self, prompt: &str) -> Result<String, BackendError> {
        (**self).send(prompt)
    }
}

/// One prompt/response exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry<'a> {
    pub doc_id: &'a str,
    /// 1-based.
    pub attempt: usize,
    pub prompt: &'a str,
    pub response: Result<&'a str, &'a BackendError>,
    pub verdict: String,
}

pub trait AuditSink {
    fn record(&mut self, entry: &AuditEntry<'_>);
}

/// Discards audit entries.
pub struct NoAudit;

impl AuditSink for NoAudit {
    fn record(&mut self, _: &AuditEntry<'_>) {}
}

impl<T: AuditSink + ?Sized> AuditSink for &mut T {
    fn record(&mut self, entry: &AuditEntry<'_>) {
        (**self).record(entry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptBudget {
    pub max_tokens: usize,
    pub chars_per_token: f64,
}

impl Default for PromptBudget {
    fn default() -> Self {
        PromptBudget {
            max_tokens: 128_000,
            chars_per_token: 4.0,
        }
    }
}

impl PromptBudget {
    pub fn estimate(&self, text: &str) -> usize {
        let chars = text.chars().count() as f64;
        let tokens = chars / self.chars_per_token.max(f64::MIN_POSITIVE);
        let whole = tokens as usize;
        if (whole as f64) < tokens {
            whole + 1
        } else {
            whole
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub items: Vec<ItemId>,
    pub max_retries: usize,
    /// Words kept per line on the first try; halved while over budget.
    pub word_limit: usize,
    pub min_word_limit: usize,
    pub budget: PromptBudget,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            items: DEFAULT_ITEMS.to_vec(),
            max_retries: 3,
            word_limit: 30,
            min_word_limit: 5,
            budget: PromptBudget::default(),
        }
    }
}

/// What went wrong on one attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptFailure {
    Rejected(Vec<Rejection>),
    Backend(BackendError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("prompt needs about {required} tokens but {available} are available")]
    BudgetExceeded { required: usize, available: usize },
    #[error("no acceptable response after {} attempts", failures.len())]
    RetriesExhausted { failures: Vec<AttemptFailure> },
    #[error("backend failed: {0}")]
    Backend(BackendError),
    #[error("invalid demonstration: {0}")]
    Demonstration(String),
}

/// Word limits tried in order: `start`, then halving, never below `min`.
pub fn word_limit_schedule(start: usize, min: usize) -> Vec<usize> {
    let min = min.max(1);
    let mut out = alloc::vec![start.max(min)];
    while *out.last().expect("non-empty") > min {
        let next = (out.last().expect("non-empty") / 2).max(min);
        out.push(next);
    }
    out
}

/// Builds the prompt at the largest word limit that fits the budget.
pub fn prompt_within_budget(
    lines: &[TextLine],
    demos: &[Demonstration],
    config: &LlmConfig,
) -> Result<(String, LibReport), LlmError> {
    let mut required = 0;
    for limit in word_limit_schedule(config.word_limit, config.min_word_limit) {
        let report = format_lib_report(lines, limit);
        let prompt = build_prompt(&report, demos, &config.items);
        required = config.budget.estimate(&prompt);
        if required <= config.budget.max_tokens {
            return Ok((prompt, report));
        }
    }
    Err(LlmError::BudgetExceeded {
        required,
        available: config.budget.max_tokens,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutcome {
    pub spans: Vec<ItemSpan>,
    pub response: LibResponse,
    pub attempts: usize,
    pub word_limit: usize,
}

/// Prompts, validates, and reruns up to `max_retries` times on rejection or
/// a retriable backend error.
pub fn segment_llm(
    doc_id: &str,
    lines: &[TextLine],
    backend: &mut dyn ChatBackend,
    demos: &[Demonstration],
    config: &LlmConfig,
    audit: &mut dyn AuditSink,
) -> Result<LlmOutcome, LlmError> {
    let (prompt, report) = prompt_within_budget(lines, demos, config)?;
    let mut failures = Vec::new();
    for attempt in 1..=config.max_retries + 1 {
        let reply = backend.send(&prompt);
        let (verdict, result) = match &reply {
            Ok(text) => match parse_response(text, report.issued_ids(), &config.items) {
                Ok(resp) => ("accepted".to_string(), Ok(resp)),
                Err(reasons) => {
                    let why: Vec<String> = reasons.iter().map(ToString::to_string).collect();
                    (
                        format!("rejected: {}", why.join("; ")),
                        Err(AttemptFailure::Rejected(reasons)),
                    )
                }
            },
            Err(e) => (format!("backend error: {e}"), Err(AttemptFailure::Backend(e.clone()))),
        };
        audit.record(&AuditEntry {
            doc_id,
            attempt,
            prompt: &prompt,
            response: reply.as_deref(),
            verdict,
        });
        match result {
            Ok(response) => {
                return Ok(LlmOutcome {
                    spans: spans_from_assignments(&response, lines.len()),
                    response,
                    attempts: attempt,
                    word_limit: report.truncation_limit,
                })
            }
            Err(AttemptFailure::Backend(e)) if !e.retriable => return Err(LlmError::Backend(e)),
            Err(f) => failures.push(f),
        }
    }
    Err(LlmError::RetriesExhausted { failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line::number_lines;
    use ItemId::*;

    #[test]
    fn report_rendering() {
        let lines = number_lines(["Table of Contents", "one two three four five six seven"]);
        let r = format_lib_report(&lines, 10);
        assert_eq!(r.render(), "0 Table of Contents\n1 one two three four five six seven\n");
        assert_eq!(format_lib_report(&lines, 5).lines[1].1, "one two three four five");
        assert!(format_lib_report(&[], 5).lines.is_empty());
    }

    #[test]
    fn schedule_halves_to_minimum() {
        assert_eq!(word_limit_schedule(30, 5), [30, 15, 7, 5]);
        assert_eq!(word_limit_schedule(5, 5), [5]);
    }

    #[test]
    fn parse_rejections() {
        let items = [I1, I1A];
        assert_eq!(
            parse_response("Item 1,abc\nItem 1A,NA", 0..10, &items),
            Err(alloc::vec![Rejection::NonInteger {
                item: I1,
                value: "abc".into()
            }])
        );
        assert_eq!(
            parse_response("Item 1,99999\nItem 1A,NA", 0..3495, &items),
            Err(alloc::vec![Rejection::NotIssued { item: I1, id: 99999 }])
        );
        assert_eq!(
            parse_response("Item 1,3", 0..10, &items),
            Err(alloc::vec![Rejection::Missing(I1A)])
        );
        assert_eq!(
            parse_response("nothing here", 0..10, &items),
            Err(alloc::vec![Rejection::NoRows])
        );
        assert!(matches!(
            parse_response("Item 1,3\nItem 1,4\nItem 1A,NA", 0..10, &items),
            Err(r) if r == [Rejection::Duplicate(I1)]
        ));
        let ok = parse_response("Sure!\n```\nItem ID,Line ID\nItem 1, 3\nitem 1a,NA\n```", 0..10, &items).unwrap();
        assert_eq!(ok.assignments[&I1], Some(3));
        assert_eq!(ok.assignments[&I1A], None);
    }

    #[test]
    fn spans_from_ids() {
        let resp = LibResponse {
            assignments: [(I1, Some(67)), (I1A, Some(277)), (I2, None)].into_iter().collect(),
        };
        assert_eq!(
            spans_from_assignments(&resp, 300),
            [ItemSpan::new(I1, 67, 276), ItemSpan::new(I1A, 277, 299)]
        );
        let single = LibResponse {
            assignments: [(I1, Some(0))].into_iter().collect(),
        };
        assert_eq!(spans_from_assignments(&single, 10), [ItemSpan::new(I1, 0, 9)]);
        let out_of_order = LibResponse {
            assignments: [(I1, Some(50)), (I1A, Some(10)), (I2, Some(80))].into_iter().collect(),
        };
        // equal-length chains: the one starting earlier in the document wins
        assert_eq!(
            spans_from_assignments(&out_of_order, 100),
            [ItemSpan::new(I1A, 10, 79), ItemSpan::new(I2, 80, 99)]
        );
    }

    #[test]
    fn demonstration_output_lists_na() {
        let excerpt: Vec<TextLine> = [(86, "PART I"), (87, "ITEM 1. BUSINESS"), (88, "Our Company")]
            .iter()
            .map(|&(id, t)| TextLine {
                line_id: id,
                text: t.into(),
            })
            .collect();
        let starts = [(I1, 87)].into_iter().collect();
        let d = Demonstration::from_excerpt(&excerpt, &starts, &DEFAULT_ITEMS, 30).unwrap();
        assert!(d.expected_output.starts_with("Item 1,87\nItem 1A,NA\nItem 2,NA\n"));
        assert_eq!(d.expected_output.lines().count(), 18);
        assert!(d.excerpt.contains("87 ITEM 1. BUSINESS\n"));
        let bad = [(I1, 5)].into_iter().collect();
        assert!(Demonstration::from_excerpt(&excerpt, &bad, &DEFAULT_ITEMS, 30).is_err());
    }

    #[test]
    fn prompt_structure() {
        let lines = number_lines(["Table of Contents", "ITEM 1. BUSINESS"]);
        let report = format_lib_report(&lines, 30);
        let p = build_prompt(&report, &[], &DEFAULT_ITEMS);
        assert!(p.starts_with("I am an excellent financial professional."));
        assert!(p.contains("If the item is not available, print NA."));
        assert!(p.contains("Use comma (\",\") to separate the two columns."));
        assert!(!p.contains("Below are some examples."));
        assert!(p.contains("=====\n0 Table of Contents\n1 ITEM 1. BUSINESS\n=====\n"));
    }
}
