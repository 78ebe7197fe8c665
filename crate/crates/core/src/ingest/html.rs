//! HTML to line-structured plain text.
//!
//! Block-level elements and table rows start new lines, cells of a row are
//! joined with a single space, and inline markup is flattened. The scanner
//! never fails: unterminated tags and stray `<` fall back to literal text.

use alloc::string::String;
use alloc::vec::Vec;

use super::sgml::{BodyFormat, DocumentSession};
use crate::line::{filter_lines, number_lines, TextLine};

const BLOCK_TAGS: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "body",
    "caption",
    "center",
    "dd",
    "div",
    "dl",
    "dt",
    "fieldset",
    "figcaption",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "html",
    "li",
    "main",
    "nav",
    "ol",
    "p",
    "pre",
    "section",
    "table",
    "tbody",
    "tfoot",
    "thead",
    "title",
    "tr",
    "ul",
];
const CELL_TAGS: &[&str] = &["td", "th"];
// elements whose content is never rendered
const SKIP_TAGS: &[&str] = &["head", "script", "style", "template", "ix:header", "noscript"];

struct LineWriter {
    lines: Vec<String>,
    current: String,
    pending_space: bool,
}

impl LineWriter {
    fn new() -> Self {
        LineWriter {
            lines: Vec::new(),
            current: String::new(),
            pending_space: false,
        }
    }

    fn text(&mut self, decoded: &str, preformatted: bool) {
        for c in decoded.chars() {
            if preformatted && c == '\n' {
                self.break_line();
            } else if c.is_whitespace() {
                self.pending_space = true;
            } else if !c.is_control() {
                if self.pending_space && !self.current.is_empty() {
                    self.current.push(' ');
                }
                self.pending_space = false;
                self.current.push(c);
            }
        }
    }

    fn space(&mut self) {
        self.pending_space = true;
    }

    fn break_line(&mut self) {
        if !self.current.is_empty() {
            self.lines.push(core::mem::take(&mut self.current));
        }
        self.pending_space = false;
    }

    fn finish(mut self) -> Vec<String> {
        self.break_line();
        self.lines
    }
}

/// Maps C1 control code points produced by numeric references such as
/// `&#151;` to the windows-1252 characters authors meant.
fn fix_cp1252(c: char) -> char {
    match c as u32 {
        0x80 => '€',
        0x82 => '‚',
        0x84 => '„',
        0x85 => '…',
        0x91 => '‘',
        0x92 => '’',
        0x93 => '“',
        0x94 => '”',
        0x95 => '•',
        0x96 => '–',
        0x97 => '—',
        0x99 => '™',
        _ => c,
    }
}

fn decode(raw: &str) -> String {
    html_escape::decode_html_entities(raw).chars().map(fix_cp1252).collect()
}

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
}

/// Parses a tag starting at `s[0] == '<'`; returns the tag and bytes consumed.
fn parse_tag(s: &str) -> Option<(Tag, usize)> {
    let bytes = s.as_bytes();
    let mut i = 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let name_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || matches!(bytes[i], b':' | b'-' | b'_')) {
        i += 1;
    }
    if i == name_start || !bytes[name_start].is_ascii_alphabetic() {
        return None;
    }
    let name = s[name_start..i].to_ascii_lowercase();
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => {
                let self_closing = i > 0 && bytes[i - 1] == b'/';
                return Some((
                    Tag {
                        name,
                        closing,
                        self_closing,
                    },
                    i + 1,
                ));
            }
            None => {}
        }
        i += 1;
    }
    None
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let n = needle.len();
    if n > haystack.len() {
        return None;
    }
    let hb = haystack.as_bytes();
    (0..=hb.len() - n).find(|&i| hb[i..i + n].eq_ignore_ascii_case(needle.as_bytes()))
}

/// Converts an HTML body to unfiltered text lines.
pub fn html_text_lines(html: &str) -> Vec<String> {
    let mut out = LineWriter::new();
    let mut pre_depth = 0usize;
    let mut pos = 0;
    let mut text_start = 0;

    let flush_text = |out: &mut LineWriter, from: usize, to: usize, pre: bool| {
        if from < to {
            out.text(&decode(&html[from..to]), pre);
        }
    };

    while let Some(rel) = html[pos..].find('<') {
        let lt = pos + rel;
        let rest = &html[lt..];

        if rest.starts_with("<!--") {
            flush_text(&mut out, text_start, lt, pre_depth > 0);
            let end = rest.find("-->").map_or(html.len(), |e| lt + e + 3);
            pos = end;
            text_start = end;
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            flush_text(&mut out, text_start, lt, pre_depth > 0);
            let end = rest.find('>').map_or(html.len(), |e| lt + e + 1);
            pos = end;
            text_start = end;
            continue;
        }
        let Some((tag, consumed)) = parse_tag(rest) else {
            // literal '<'
            pos = lt + 1;
            continue;
        };
        flush_text(&mut out, text_start, lt, pre_depth > 0);
        pos = lt + consumed;
        text_start = pos;

        let name = tag.name.as_str();
        if !tag.closing && !tag.self_closing && SKIP_TAGS.contains(&name) {
            let close = alloc::format!("</{name}");
            let end = match find_ci(&html[pos..], &close) {
                Some(e) => {
                    let after = pos + e;
                    html[after..].find('>').map_or(html.len(), |g| after + g + 1)
                }
                None => html.len(),
            };
            pos = end;
            text_start = end;
            continue;
        }
        if name == "br" {
            out.break_line();
        } else if name == "pre" {
            out.break_line();
            if tag.closing {
                pre_depth = pre_depth.saturating_sub(1);
            } else if !tag.self_closing {
                pre_depth += 1;
            }
        } else if BLOCK_TAGS.contains(&name) {
            out.break_line();
        } else if CELL_TAGS.contains(&name) {
            out.space();
        }
    }
    flush_text(&mut out, text_start, html.len(), pre_depth > 0);
    out.finish()
}

/// Splits a plain-text body on newlines, stripping trailing whitespace.
pub fn plain_text_lines(text: &str) -> Vec<String> {
    text.lines().map(|l| String::from(l.trim_end())).collect()
}

/// Converts a document session to filtered, numbered lines.
pub fn html_to_lines(session: &DocumentSession) -> Vec<TextLine> {
    let raw = match session.body_format {
        BodyFormat::Html => html_text_lines(&session.body),
        BodyFormat::PlainText => plain_text_lines(&session.body),
    };
    filter_lines(number_lines(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn html(body: &str) -> Vec<String> {
        html_text_lines(body)
    }

    #[test]
    fn paragraphs_are_lines() {
        assert_eq!(
            html("<p>Item 1. Business</p><p>We make widgets.</p>"),
            ["Item 1. Business", "We make widgets."]
        );
    }

    #[test]
    fn table_rows_join_cells() {
        let t = "<table><tr><td>Item 1.</td><td>Business</td></tr><tr><td>Item 2.</td><td>Properties</td></tr></table>";
        assert_eq!(html(t), ["Item 1. Business", "Item 2. Properties"]);
    }

    #[test]
    fn inline_markup_flattened_and_entities_decoded() {
        assert_eq!(
            html("<div><b>ITEM&nbsp;7.</b> <i>MANAGEMENT&#8217;S</i>&#151;D&amp;A &bogus;</div>"),
            ["ITEM 7. MANAGEMENT’S—D&A &bogus;"]
        );
    }

    #[test]
    fn skips_head_script_comments() {
        let doc = "<html><head><title>t</title><style>p{}</style></head><body><!-- c <p>no</p> -->\
<script>var a = '<p>';</script><p>kept</p><ix:header><p>hidden</p></ix:header></body></html>";
        assert_eq!(html(doc), ["kept"]);
    }

    #[test]
    fn br_and_pre() {
        assert_eq!(html("a<br/>b<BR>c"), ["a", "b", "c"]);
        assert_eq!(html("<pre>x  y\nz\n</pre>"), ["x y", "z"]);
    }

    #[test]
    fn malformed_html_degrades() {
        assert_eq!(html("a < b <p>c"), ["a < b", "c"]);
        assert_eq!(html("<p>unterminated <b"), ["unterminated <b"]);
    }

    #[test]
    fn plain_text_session() {
        let session = DocumentSession {
            doc_type: "10-K".to_string(),
            filename: "a.txt".to_string(),
            body: "ITEM 1. BUSINESS  \r\nWe make widgets.\nThe company sells them.".to_string(),
            body_format: BodyFormat::PlainText,
        };
        let lines = html_to_lines(&session);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].text, "ITEM 1. BUSINESS");
        assert_eq!(lines[2].line_id, 2);
    }
}
