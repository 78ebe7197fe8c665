use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::line::{tokens, TextLine};

/// Word counts above this are clamped before entering `str:word_len`.
pub const WORD_LEN_CAP: usize = 200;

/// Sparse feature map of one line. Names are namespaced `uni:`, `bi:`,
/// `syn:` and `str:`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineFeatures(pub BTreeMap<String, f64>);

impl LineFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn clean_token(tok: String) -> String {
    // the model file joins feature and label with U+001F
    if tok.chars().any(char::is_control) {
        tok.chars().filter(|c| !c.is_control()).collect()
    } else {
        tok
    }
}

/// Semantic, syntactic and structural features of `lines[position]`.
pub fn extract_features(lines: &[TextLine], position: usize) -> LineFeatures {
    let text = lines[position].text.as_str();
    let mut map = BTreeMap::new();

    let toks: Vec<String> = tokens(text).map(clean_token).filter(|t| !t.is_empty()).collect();
    for t in &toks {
        map.insert(format!("uni:{t}"), 1.0);
    }
    for pair in toks.windows(2) {
        map.insert(format!("bi:{}|{}", pair[0], pair[1]), 1.0);
    }

    let first_upper = text.chars().next().is_some_and(char::is_uppercase);
    map.insert("syn:first_upper".into(), if first_upper { 1.0 } else { 0.0 });
    let (mut letters, mut upper) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if c.is_uppercase() {
            upper += 1;
        }
    }
    let upper_pct = if letters == 0 {
        0.0
    } else {
        upper as f64 / letters as f64
    };
    map.insert("syn:upper_pct".into(), upper_pct);

    let words = text.split_whitespace().count().min(WORD_LEN_CAP);
    map.insert("str:word_len".into(), words as f64);
    let n = lines.len();
    let fwd = position as f64 / (n.saturating_sub(1)).max(1) as f64;
    map.insert("str:fwd_pos".into(), fwd);
    map.insert("str:bwd_pos".into(), 1.0 - fwd);

    LineFeatures(map)
}

/// Features for every line of a document.
pub fn extract_all(lines: &[TextLine]) -> Vec<LineFeatures> {
    (0..lines.len()).map(|i| extract_features(lines, i)).collect()
}
