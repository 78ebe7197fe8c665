//! CSV and JSON renderings of evaluation reports and corpus statistics.

use itemseg_core::eval::{Aggregation, EvalReport, ItemScore, ItemStats};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct ItemRow {
    item: String,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    precision: f64,
    recall: f64,
    f1: f64,
}

impl From<&ItemScore> for ItemRow {
    fn from(s: &ItemScore) -> Self {
        ItemRow {
            item: s.item.to_string(),
            tp: s.tp,
            fp: s.fp,
            fn_: s.fn_,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        }
    }
}

#[derive(Serialize)]
struct GroupRow {
    name: String,
    members: Vec<String>,
    macro_f1: Option<f64>,
}

#[derive(Serialize)]
struct JsonReport {
    aggregation: &'static str,
    items: Vec<ItemRow>,
    groups: Vec<GroupRow>,
}

fn aggregation_name(a: Aggregation) -> &'static str {
    match a {
        Aggregation::Pooled => "pooled",
        Aggregation::PerDocument => "per-document",
    }
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

/// Per-item rows, then one `macro_f1:<group>` footer row per group with
/// only the f1 column filled (`NA` when the group has no scored items).
pub fn eval_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item", "tp", "fp", "fn", "precision", "recall", "f1"])
        .expect("in-memory write");
    for s in &report.items {
        w.write_record([
            s.item.to_string(),
            s.tp.to_string(),
            s.fp.to_string(),
            s.fn_.to_string(),
            fixed(s.precision),
            fixed(s.recall),
            fixed(s.f1),
        ])
        .expect("in-memory write");
    }
    for g in &report.groups {
        let f1 = g.macro_f1.map(fixed).unwrap_or_else(|| "NA".into());
        let label = format!("macro_f1:{}", g.name);
        w.write_record([label.as_str(), "", "", "", "", "", f1.as_str()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub fn eval_json(report: &EvalReport) -> String {
    let doc = JsonReport {
        aggregation: aggregation_name(report.aggregation),
        items: report.items.iter().map(ItemRow::from).collect(),
        groups: report
            .groups
            .iter()
            .map(|g| GroupRow {
                name: g.name.clone(),
                members: g.members.iter().map(ToString::to_string).collect(),
                macro_f1: g.macro_f1,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct StatsRow {
    item: String,
    avg_order: Option<f64>,
    avg_word_length: f64,
    avg_line_length: f64,
    prevalence: f64,
}

fn stats_rows(stats: &[ItemStats]) -> Vec<StatsRow> {
    stats
        .iter()
        .map(|s| StatsRow {
            item: s.item.to_string(),
            avg_order: s.avg_order,
            avg_word_length: s.avg_word_length,
            avg_line_length: s.avg_line_length,
            prevalence: s.prevalence,
        })
        .collect()
}

pub fn stats_csv(stats: &[ItemStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item", "avg_order", "avg_word_length", "avg_line_length", "prevalence"])
        .expect("in-memory write");
    for r in stats_rows(stats) {
        w.write_record([
            r.item,
            r.avg_order.map(|x| format!("{x:.2}")).unwrap_or_else(|| "NA".into()),
            format!("{:.2}", r.avg_word_length),
            format!("{:.2}", r.avg_line_length),
            format!("{:.4}", r.prevalence),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub fn stats_json(stats: &[ItemStats]) -> String {
    let mut s = serde_json::to_string_pretty(&stats_rows(stats)).expect("stats serialize");
    s.push('\n');
    s
}
