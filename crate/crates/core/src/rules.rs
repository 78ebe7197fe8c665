//! Rule-based segmentation: heading patterns, table-of-contents suppression
//! and item-order constraints.

use alloc::vec::Vec;

use crate::item::ItemId;
use crate::labels::{order_filter, spans_from_starts, ItemSpan};
use crate::line::{tokens, TextLine};

/// Which heading rule matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingPattern {
    /// "Item N" followed by at least one of the item's title keywords.
    ItemWithTitle,
    /// "Item N" alone, optionally followed by punctuation.
    ItemBare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingMatch {
    pub line_id: usize,
    pub item: ItemId,
    pub pattern: HeadingPattern,
    pub score: f64,
}

/// Neighborhood radius and density threshold for table-of-contents detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TocRule {
    pub radius: usize,
    pub min_neighbors: usize,
}

impl Default for TocRule {
    fn default() -> Self {
        TocRule {
            radius: 5,
            min_neighbors: 5,
        }
    }
}

fn strip_part_prefix(s: &str) -> &str {
    let lower_starts =
        |s: &str, p: &str| s.len() >= p.len() && s.as_bytes()[..p.len()].eq_ignore_ascii_case(p.as_bytes());
    if !lower_starts(s, "part") {
        return s;
    }
    let rest = s[4..].trim_start();
    let numeral_len = rest
        .bytes()
        .take_while(|b| matches!(b.to_ascii_uppercase(), b'I' | b'V' | b'X'))
        .count();
    if numeral_len == 0 {
        return s;
    }
    let after = &rest[numeral_len..];
    if after.starts_with(|c: char| c.is_alphanumeric()) {
        return s;
    }
    after.trim_start_matches(|c: char| c.is_whitespace() || ".,:;-–—".contains(c))
}

/// Recognizes a heading line: optional "PART x", then "ITEM" (any case),
/// the item number, an optional separator and optional title words.
pub fn match_heading(text: &str) -> Option<(ItemId, HeadingPattern, f64)> {
    let s = strip_part_prefix(text.trim_start());
    let word_len = s.bytes().take_while(u8::is_ascii_alphabetic).count();
    let word = &s[..word_len];
    if !(word.eq_ignore_ascii_case("item") || word.eq_ignore_ascii_case("items")) {
        return None;
    }
    let rest = s[word_len..].trim_start_matches(|c: char| c.is_whitespace() || c == '\u{a0}');
    let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let mut num_len = digits;
    if let Some(&b) = rest.as_bytes().get(digits) {
        if matches!(b.to_ascii_uppercase(), b'A' | b'B' | b'C')
            && !rest.as_bytes().get(digits + 1).is_some_and(u8::is_ascii_alphabetic)
        {
            num_len += 1;
        }
    }
    if rest.as_bytes().get(num_len).is_some_and(u8::is_ascii_alphanumeric) {
        return None;
    }
    let item = ItemId::parse_loose(&rest[..num_len])?;
    let title = rest[num_len..].trim_start_matches(|c: char| c.is_whitespace() || ".:;,-–—)(".contains(c));

    let words: Vec<_> = tokens(title).collect();
    if words.is_empty() {
        return Some((item, HeadingPattern::ItemBare, 0.6));
    }
    let keywords = item.keywords();
    let hits = words.iter().filter(|w| keywords.contains(&w.as_str())).count();
    if hits == 0 {
        return None;
    }
    let score = 1.0 + hits as f64 / words.len() as f64;
    Some((item, HeadingPattern::ItemWithTitle, score))
}

/// All heading matches with their table-of-contents density flag.
pub fn find_headings(lines: &[TextLine], toc: TocRule) -> Vec<(HeadingMatch, bool)> {
    let matched: Vec<Option<(ItemId, HeadingPattern, f64)>> = lines.iter().map(|l| match_heading(&l.text)).collect();
    let mut out = Vec::new();
    for (i, m) in matched.iter().enumerate() {
        let Some((item, pattern, score)) = *m else { continue };
        let lo = i.saturating_sub(toc.radius);
        let hi = (i + toc.radius).min(matched.len().saturating_sub(1));
        let neighbors = (lo..=hi).filter(|&j| j != i && matched[j].is_some()).count();
        let dense = neighbors >= toc.min_neighbors;
        out.push((
            HeadingMatch {
                line_id: lines[i].line_id,
                item,
                pattern,
                score: if dense { score * 0.1 } else { score },
            },
            dense,
        ));
    }
    out
}

/// The last line of the table of contents: the first cluster of dense
/// matches, provided it comes before every non-dense heading.
fn toc_end(matches: &[(HeadingMatch, bool)], radius: usize) -> Option<usize> {
    let first_dense = matches.iter().position(|(_, dense)| *dense)?;
    if matches[..first_dense].iter().any(|(_, dense)| !dense) {
        return None;
    }
    let mut end = matches[first_dense].0.line_id;
    for (m, dense) in &matches[first_dense + 1..] {
        if !dense || m.line_id > end + 2 * radius {
            break;
        }
        end = m.line_id;
    }
    Some(end)
}

/// Segments filtered, numbered lines with the heading rules.
pub fn segment_rule_based(lines: &[TextLine]) -> Vec<ItemSpan> {
    segment_rule_based_with(lines, TocRule::default())
}

pub fn segment_rule_based_with(lines: &[TextLine], toc: TocRule) -> Vec<ItemSpan> {
    if lines.is_empty() {
        return Vec::new();
    }
    let matches = find_headings(lines, toc);
    let toc_last = toc_end(&matches, toc.radius);

    let mut starts: Vec<(usize, ItemId)> = Vec::new();
    for item in ItemId::ALL {
        let of_item = || matches.iter().filter(move |(m, _)| m.item == item);
        let chosen = of_item().filter(|(_, dense)| !dense).next_back().or_else(|| {
            of_item()
                .filter(|(m, _)| toc_last.is_none_or(|end| m.line_id > end))
                .next_back()
        });
        if let Some((m, _)) = chosen {
            starts.push((m.line_id, item));
        }
    }
    starts.sort_unstable();
    let kept = order_filter(&starts);
    // line ids are positions after filtering
    spans_from_starts(&kept, lines.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::item::ItemId::*;
    use crate::line::number_lines;
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;

    #[test]
    fn heading_variants() {
        assert_eq!(match_heading("ITEM 1. BUSINESS").unwrap().0, I1);
        assert_eq!(match_heading("Item 1A - Risk Factors").unwrap().0, I1A);
        assert_eq!(match_heading("PART II, ITEM 7. MANAGEMENT'S DISCUSSION").unwrap().0, I7);
        assert_eq!(match_heading("item 7a: quantitative and qualitative").unwrap().0, I7A);
        assert_eq!(match_heading("Item 9.").unwrap(), (I9, HeadingPattern::ItemBare, 0.6));
        assert_eq!(match_heading("ITEM 10").unwrap().0, I10);
        assert_eq!(match_heading("Item1.Business").unwrap().0, I1);
        assert!(match_heading("Item 7 of this report discusses results").is_none());
        assert!(match_heading("Itemized deductions").is_none());
        assert!(match_heading("Item 17. Something").is_none());
        assert!(match_heading("The Company, Item 1. Business").is_none());
        assert!(match_heading("Item 1Abc").is_none());
    }

    #[test]
    fn no_item_tokens_gives_nothing() {
        let lines = number_lines(vec!["Annual report", "We make widgets."]);
        assert!(segment_rule_based(&lines).is_empty());
        assert!(segment_rule_based(&[]).is_empty());
    }

    fn body(n: usize) -> impl Iterator<Item = String> {
        (0..n).map(|k| format!("The company discusses its operations in considerable detail here {k}."))
    }

    #[test]
    fn toc_entry_loses_to_body_heading() {
        let mut texts: Vec<String> = vec!["TABLE OF CONTENTS".into()];
        for item in [I1, I1A, I2, I3, I7, I8] {
            texts.push(format!("Item {item}. {}", item.title()));
        }
        texts.extend(body(3));
        for item in [I1, I1A, I2, I3, I7, I8] {
            texts.push(format!("ITEM {item}. {}", item.title().to_uppercase()));
            texts.extend(body(4));
        }
        let lines = number_lines(texts);
        let spans = segment_rule_based(&lines);
        let starts: Vec<(usize, ItemId)> = spans.iter().map(|s| (s.start_line, s.item)).collect();
        assert_eq!(starts, [(10, I1), (15, I1A), (20, I2), (25, I3), (30, I7), (35, I8)]);
        assert_eq!(spans.last().unwrap().end_line, lines.len() - 1);
    }

    #[test]
    fn dense_body_cluster_is_kept_after_toc() {
        // items 10-14 are one-liners in the body, which makes them dense too
        let mut texts: Vec<String> = vec!["TABLE OF CONTENTS".into()];
        let all = [I1, I7, I9, I9A, I9B, I10, I11, I12, I13, I14];
        for item in all {
            texts.push(format!("Item {item}. {}", item.title()));
        }
        texts.extend(body(5));
        for item in all {
            texts.push(format!("Item {item}. {}", item.title()));
            texts.extend(body(if item < I9 { 6 } else { 0 }));
        }
        let lines = number_lines(texts);
        let spans = segment_rule_based(&lines);
        assert_eq!(spans.len(), all.len());
        assert!(spans.iter().all(|s| s.start_line > all.len() + 5));
    }

    #[test]
    fn out_of_order_match_dropped() {
        let mut texts: Vec<String> = vec!["Item 8. Financial Statements".into()];
        texts.extend(body(6));
        texts.push("Item 1. Business".into());
        texts.extend(body(6));
        texts.push("Item 2. Properties".into());
        texts.extend(body(6));
        let spans = segment_rule_based(&number_lines(texts));
        let items: Vec<ItemId> = spans.iter().map(|s| s.item).collect();
        assert_eq!(items, [I1, I2]);
    }
}
