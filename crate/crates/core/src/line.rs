//! Text lines, the unit of labeling, and the non-alphabetic line filter.

use alloc::string::String;
use alloc::vec::Vec;

/// One visual line of a converted filing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextLine {
    pub line_id: usize,
    pub text: String,
}

impl TextLine {
    pub fn new(line_id: usize, text: impl Into<String>) -> Self {
        TextLine {
            line_id,
            text: text.into(),
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }
}

/// Numbers a sequence of strings as consecutive lines starting at 0.
pub fn number_lines<I, S>(texts: I) -> Vec<TextLine>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| TextLine::new(i, t))
        .collect()
}

fn is_alphabetic_word(word: &str) -> bool {
    word.chars().any(char::is_alphabetic)
}

/// True when the line survives the filter: it has at least one word and at
/// most half of its words lack an alphabetic character.
pub fn keep_line(text: &str) -> bool {
    let mut total = 0usize;
    let mut non_alpha = 0usize;
    for word in text.split_whitespace() {
        total += 1;
        if !is_alphabetic_word(word) {
            non_alpha += 1;
        }
    }
    total > 0 && 2 * non_alpha <= total
}

/// Drops empty lines and lines where strictly more than 50% of the
/// whitespace-delimited words contain no letter, then renumbers from 0.
pub fn filter_lines(lines: Vec<TextLine>) -> Vec<TextLine> {
    lines
        .into_iter()
        .filter(|line| keep_line(&line.text))
        .enumerate()
        .map(|(i, mut line)| {
            line.line_id = i;
            line
        })
        .collect()
}

/// Lower-cased tokens with leading and trailing punctuation stripped; tokens
/// that are pure punctuation vanish.
pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|w| {
        let trimmed = w.trim_matches(|c: char| !c.is_alphanumeric());
        if trimmed.is_empty() {
            None
        } else {
            Some(trimmed.to_lowercase())
        }
    })
}
