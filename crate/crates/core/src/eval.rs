//! Line-level scoring, annotator agreement and corpus statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::item::{ItemId, LineLabel};
use crate::labels::AnnotatedDocument;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold has {gold} labels but prediction has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
}

/// Line tallies for one item with B and I merged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ItemCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ItemCounts {
    pub fn add(&mut self, other: ItemCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn score(self, item: ItemId) -> ItemScore {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        ItemScore {
            item,
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }

    /// Gold lines of the item.
    pub fn support(self) -> usize {
        self.tp + self.fn_
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemScore {
    pub item: ItemId,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check_lengths(gold: &[LineLabel], pred: &[LineLabel]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(())
}

pub fn line_counts(gold: &[LineLabel], pred: &[LineLabel], item: ItemId) -> Result<ItemCounts, EvalError> {
    check_lengths(gold, pred)?;
    let mut c = ItemCounts::default();
    for (g, p) in gold.iter().zip(pred) {
        match (g.item() == Some(item), p.item() == Some(item)) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

pub fn line_prf(gold: &[LineLabel], pred: &[LineLabel], item: ItemId) -> Result<ItemScore, EvalError> {
    Ok(line_counts(gold, pred, item)?.score(item))
}

/// Unweighted mean; `None` for an empty list.
pub fn macro_average(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub fn macro_f1(scores: &[ItemScore]) -> Option<f64> {
    let f1: Vec<f64> = scores.iter().map(|s| s.f1).collect();
    macro_average(&f1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemGroup {
    pub name: String,
    pub items: Vec<ItemId>,
}

impl ItemGroup {
    pub fn new(name: impl Into<String>, items: Vec<ItemId>) -> Self {
        ItemGroup {
            name: name.into(),
            items,
        }
    }

    pub fn core() -> Self {
        use ItemId::*;
        Self::new("core", alloc::vec![I1, I1A, I3, I7])
    }

    pub fn other() -> Self {
        use ItemId::*;
        Self::new(
            "other",
            alloc::vec![I2, I4, I5, I6, I7A, I8, I9, I9A, I10, I11, I12, I13, I14],
        )
    }

    pub fn defaults() -> Vec<Self> {
        alloc::vec![Self::core(), Self::other()]
    }
}

/// How per-item scores are aggregated over documents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Counts summed over the corpus, then scored.
    #[default]
    Pooled,
    /// Scored per document, then averaged over documents where the item
    /// appears in gold or prediction.
    PerDocument,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub name: String,
    pub members: Vec<ItemId>,
    /// Scores of members that occur in gold or prediction.
    pub scores: Vec<ItemScore>,
    pub macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Every item that occurs in gold or prediction, canonical order.
    pub items: Vec<ItemScore>,
    pub groups: Vec<GroupReport>,
    pub aggregation: Aggregation,
}

impl EvalReport {
    pub fn item(&self, item: ItemId) -> Option<&ItemScore> {
        self.items.iter().find(|s| s.item == item)
    }

    pub fn group(&self, name: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.name == name)
    }
}

/// Scores `(gold, pred)` label pairs, one pair per document.
pub fn evaluate(
    docs: &[(&[LineLabel], &[LineLabel])],
    groups: &[ItemGroup],
    aggregation: Aggregation,
) -> Result<EvalReport, EvalError> {
    if docs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut pooled: BTreeMap<ItemId, ItemCounts> = BTreeMap::new();
    let mut per_doc: BTreeMap<ItemId, Vec<ItemScore>> = BTreeMap::new();
    for (gold, pred) in docs {
        check_lengths(gold, pred)?;
        let mut counts: BTreeMap<ItemId, ItemCounts> = BTreeMap::new();
        for (g, p) in gold.iter().zip(pred.iter()) {
            match (g.item(), p.item()) {
                (Some(a), Some(b)) if a == b => counts.entry(a).or_default().tp += 1,
                (ga, pb) => {
                    if let Some(a) = ga {
                        counts.entry(a).or_default().fn_ += 1;
                    }
                    if let Some(b) = pb {
                        counts.entry(b).or_default().fp += 1;
                    }
                }
            }
        }
        for (item, c) in counts {
            pooled.entry(item).or_default().add(c);
            per_doc.entry(item).or_default().push(c.score(item));
        }
    }
    let items: Vec<ItemScore> = pooled
        .iter()
        .map(|(&item, &c)| match aggregation {
            Aggregation::Pooled => c.score(item),
            Aggregation::PerDocument => {
                let docs = &per_doc[&item];
                let mean = |f: fn(&ItemScore) -> f64| docs.iter().map(f).sum::<f64>() / docs.len() as f64;
                ItemScore {
                    precision: mean(|s| s.precision),
                    recall: mean(|s| s.recall),
                    f1: mean(|s| s.f1),
                    ..c.score(item)
                }
            }
        })
        .collect();
    let groups = groups
        .iter()
        .map(|g| {
            let scores: Vec<ItemScore> = g
                .items
                .iter()
                .filter_map(|i| items.iter().find(|s| s.item == *i).copied())
                .collect();
            GroupReport {
                name: g.name.clone(),
                members: g.items.clone(),
                macro_f1: macro_f1(&scores),
                scores,
            }
        })
        .collect();
    Ok(EvalReport {
        items,
        groups,
        aggregation,
    })
}

/// Cohen's kappa over two labelings of the same lines.
pub fn cohen_kappa(a: &[LineLabel], b: &[LineLabel]) -> Result<f64, EvalError> {
    check_lengths(a, b)?;
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = a.len() as f64;
    let mut left: BTreeMap<usize, usize> = BTreeMap::new();
    let mut right: BTreeMap<usize, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        *left.entry(x.index()).or_default() += 1;
        *right.entry(y.index()).or_default() += 1;
        agree += usize::from(x == y);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = left
        .iter()
        .map(|(k, &ca)| (ca as f64 / n) * (right.get(k).copied().unwrap_or(0) as f64 / n))
        .sum();
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Flags annotation pairs whose agreement falls below a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaGate {
    pub threshold: f64,
    pub enabled: bool,
}

impl Default for KappaGate {
    fn default() -> Self {
        KappaGate {
            threshold: 0.8,
            enabled: true,
        }
    }
}

impl KappaGate {
    pub fn needs_review(&self, kappa: f64) -> bool {
        self.enabled && !(kappa >= self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemStats {
    pub item: ItemId,
    /// Mean 1-based rank among the document's item starts, over documents
    /// containing the item.
    pub avg_order: Option<f64>,
    /// Mean words per document, absent documents counting 0.
    pub avg_word_length: f64,
    /// Mean lines per document, absent documents counting 0.
    pub avg_line_length: f64,
    pub prevalence: f64,
}

/// Per-item statistics for every item in canonical order.
pub fn corpus_stats(docs: &[AnnotatedDocument]) -> Result<Vec<ItemStats>, EvalError> {
    if docs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut containing = [0usize; 22];
    let mut rank_sum = [0usize; 22];
    let mut words = [0usize; 22];
    let mut lines = [0usize; 22];
    for doc in docs {
        for (rank, span) in doc.spans().iter().enumerate() {
            let k = span.item.ordinal();
            containing[k] += 1;
            rank_sum[k] += rank + 1;
        }
        for (line, label) in doc.lines.iter().zip(&doc.labels) {
            if let Some(item) = label.item() {
                lines[item.ordinal()] += 1;
                words[item.ordinal()] += line.text.split_whitespace().count();
            }
        }
    }
    let n = docs.len() as f64;
    Ok(ItemId::ALL
        .iter()
        .map(|&item| {
            let k = item.ordinal();
            ItemStats {
                item,
                avg_order: (containing[k] > 0).then(|| rank_sum[k] as f64 / containing[k] as f64),
                avg_word_length: words[k] as f64 / n,
                avg_line_length: lines[k] as f64 / n,
                prevalence: containing[k] as f64 / n,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ItemId::*;
    use LineLabel::{B, I, O};

    #[test]
    fn hand_counted_prf() {
        let gold = [O, B(I1), I(I1), I(I1), I(I1), O];
        let pred = [B(I1), I(I1), I(I1), I(I1), O, O];
        let s = line_prf(&gold, &pred, I1).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (3, 1, 1));
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
        assert!(line_prf(&gold, &pred[..2], I1).is_err());
    }

    #[test]
    fn merge_invariance_and_identity() {
        let gold = [B(I1), I(I1), B(I7), I(I7), O];
        let all_i = [I(I1), I(I1), I(I7), I(I7), O];
        for item in [I1, I7] {
            assert_eq!(line_prf(&gold, &all_i, item), line_prf(&gold, &gold, item));
            assert_eq!(line_prf(&gold, &gold, item).unwrap().f1, 1.0);
        }
    }

    #[test]
    fn kappa_hand_case() {
        // 6×O, 4×I1; one disagreement each way: p_o = 0.8, p_e = 0.52
        let a = [O, O, O, O, O, O, I(I1), I(I1), I(I1), I(I1)];
        let b = [O, O, O, O, O, I(I1), O, I(I1), I(I1), I(I1)];
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k - 7.0 / 12.0).abs() < 1e-12);
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[O, O], &[O, O]).unwrap(), 1.0);
        let balanced = [O, I(I1), O, I(I1)];
        assert!(cohen_kappa(&balanced, &[O; 4]).unwrap() <= 0.0);
    }

    #[test]
    fn gate() {
        let g = KappaGate::default();
        assert!(g.needs_review(0.79) && !g.needs_review(0.8));
        assert!(g.needs_review(f64::NAN));
        assert!(!KappaGate { enabled: false, ..g }.needs_review(0.1));
    }

    #[test]
    fn evaluate_groups() {
        let gold = [B(I1), I(I1), B(I3), B(I7), I(I7)];
        let pred = [B(I1), I(I1), B(I7), I(I7), I(I7)];
        let report = evaluate(&[(&gold, &pred)], &ItemGroup::defaults(), Aggregation::Pooled).unwrap();
        let core = report.group("core").unwrap();
        assert_eq!(core.scores.iter().map(|s| s.item).collect::<Vec<_>>(), [I1, I3, I7]);
        let i7 = report.item(I7).unwrap();
        assert_eq!((i7.tp, i7.fp, i7.fn_), (2, 1, 0));
        let expected = (1.0 + 0.0 + 0.8) / 3.0;
        assert!((core.macro_f1.unwrap() - expected).abs() < 1e-12);
        assert_eq!(report.group("other").unwrap().macro_f1, None);
    }

    #[test]
    fn per_document_mode_averages_documents() {
        let g1 = [B(I1), I(I1)];
        let p1 = [B(I1), I(I1)];
        let g2 = [B(I1), I(I1), I(I1), I(I1)];
        let p2 = [B(I1), O, O, O];
        let docs: [(&[LineLabel], &[LineLabel]); 2] = [(&g1, &p1), (&g2, &p2)];
        let pooled = evaluate(&docs, &[], Aggregation::Pooled).unwrap();
        let per_doc = evaluate(&docs, &[], Aggregation::PerDocument).unwrap();
        assert!((pooled.item(I1).unwrap().recall - 0.5).abs() < 1e-12);
        assert!((per_doc.item(I1).unwrap().recall - 0.625).abs() < 1e-12);
    }

    #[test]
    fn stats_small_corpus() {
        use crate::line::number_lines;
        let d1 =
            AnnotatedDocument::new("a", number_lines(["x y", "z", "w"]), alloc::vec![B(I1), I(I1), B(I3)]).unwrap();
        let d2 = AnnotatedDocument::new("b", number_lines(["x", "y"]), alloc::vec![B(I1), O]).unwrap();
        let stats = corpus_stats(&[d1, d2]).unwrap();
        let s1 = stats[I1.ordinal()];
        assert_eq!((s1.avg_order, s1.prevalence), (Some(1.0), 1.0));
        assert_eq!((s1.avg_line_length, s1.avg_word_length), (1.5, 2.0));
        let s3 = stats[I3.ordinal()];
        assert_eq!((s3.avg_order, s3.prevalence), (Some(2.0), 0.5));
        assert_eq!(stats[I2.ordinal()].avg_order, None);
    }
}
