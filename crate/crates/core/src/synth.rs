//! Deterministic generator of 10-K-shaped documents with known gold labels,
//! plus hash-based pseudo-embeddings for those lines.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::item::{ItemId, LineLabel};
use crate::labels::AnnotatedDocument;
use crate::line::{keep_line, number_lines, tokens};

/// Item prevalence and mean line count per item in an annotated 10-K corpus,
/// in canonical item order: `(item, prevalence, mean lines)`.
pub const CORPUS_ITEM_STATS: [(ItemId, f64, f64); 22] = [
    (ItemId::I1, 0.98, 163.50),
    (ItemId::I1A, 0.74, 80.62),
    (ItemId::I1B, 0.69, 1.61),
    (ItemId::I1C, 0.0008, 0.04),
    (ItemId::I2, 0.97, 25.60),
    (ItemId::I3, 0.98, 7.80),
    (ItemId::I4, 0.95, 6.54),
    (ItemId::I5, 0.98, 23.92),
    (ItemId::I6, 0.95, 23.51),
    (ItemId::I7, 0.98, 224.85),
    (ItemId::I7A, 0.91, 13.71),
    (ItemId::I8, 0.98, 389.22),
    (ItemId::I9, 0.97, 2.81),
    (ItemId::I9A, 0.93, 13.23),
    (ItemId::I9B, 0.77, 10.99),
    (ItemId::I10, 0.95, 21.51),
    (ItemId::I11, 0.95, 32.82),
    (ItemId::I12, 0.95, 15.31),
    (ItemId::I13, 0.95, 7.14),
    (ItemId::I14, 0.86, 6.79),
    (ItemId::I15, 0.99, 62.78),
    (ItemId::I16, 0.01, 0.10),
];

/// Mean lines outside any item, before scaling.
pub const CORPUS_OUTSIDE_LINES: f64 = 356.66;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemSpec {
    pub item: ItemId,
    /// Probability that a document contains the item.
    pub inclusion: f64,
    /// Expected number of lines of the item, heading included (at least 1).
    pub mean_lines: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub n_docs: usize,
    pub items: Vec<ItemSpec>,
    /// Probability that a document opens with a table of contents.
    pub toc_prob: f64,
    /// Per-line probability of a running page header inside an item body.
    pub noise_rate: f64,
    /// Probability of upper-case headings ("ITEM 1. BUSINESS").
    pub upper_case_prob: f64,
    /// Expected cover-page and signature lines together.
    pub outside_lines: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("probability {name} = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("mean line count for item {0} must be finite and non-negative")]
    Length(ItemId),
    #[error("item {0} listed twice or out of canonical order")]
    ItemOrder(ItemId),
}

impl GeneratorSpec {
    /// Prevalences from the reference corpus and line counts scaled down 10×.
    pub fn reference(seed: u64, n_docs: usize) -> Self {
        GeneratorSpec {
            seed,
            n_docs,
            items: CORPUS_ITEM_STATS
                .iter()
                .map(|&(item, inclusion, lines)| ItemSpec {
                    item,
                    inclusion,
                    mean_lines: (lines / 10.0).max(1.0),
                })
                .collect(),
            toc_prob: 0.85,
            noise_rate: 0.02,
            upper_case_prob: 0.5,
            outside_lines: CORPUS_OUTSIDE_LINES / 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let prob = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(SpecError::Probability { name, value })
            }
        };
        prob("toc_prob", self.toc_prob)?;
        prob("noise_rate", self.noise_rate)?;
        prob("upper_case_prob", self.upper_case_prob)?;
        let mut last: Option<ItemId> = None;
        for spec in &self.items {
            prob("inclusion", spec.inclusion)?;
            if !(spec.mean_lines.is_finite() && spec.mean_lines >= 0.0) {
                return Err(SpecError::Length(spec.item));
            }
            if last.is_some_and(|l| l >= spec.item) {
                return Err(SpecError::ItemOrder(spec.item));
            }
            last = Some(spec.item);
        }
        Ok(())
    }

    /// Expected line count of an included item.
    pub fn expected_item_lines(spec: &ItemSpec) -> f64 {
        spec.mean_lines.max(1.0)
    }
}

fn title_variants(item: ItemId) -> &'static [&'static str] {
    match item {
        ItemId::I1 => &["Business", "Description of Business"],
        ItemId::I1A => &["Risk Factors"],
        ItemId::I1B => &["Unresolved Staff Comments"],
        ItemId::I1C => &["Cybersecurity"],
        ItemId::I2 => &["Properties", "Description of Property"],
        ItemId::I3 => &["Legal Proceedings"],
        ItemId::I4 => &[
            "Mine Safety Disclosures",
            "Submission of Matters to a Vote of Security Holders",
            "(Removed and Reserved)",
        ],
        ItemId::I5 => &[
            "Market for Registrant's Common Equity, Related Stockholder Matters and Issuer Purchases of Equity Securities",
            "Market for the Registrant's Common Equity and Related Stockholder Matters",
        ],
        ItemId::I6 => &["Selected Financial Data", "[Reserved]"],
        ItemId::I7 => &["Management's Discussion and Analysis of Financial Condition and Results of Operations"],
        ItemId::I7A => &["Quantitative and Qualitative Disclosures About Market Risk"],
        ItemId::I8 => &["Financial Statements and Supplementary Data"],
        ItemId::I9 => &[
            "Changes in and Disagreements with Accountants on Accounting and Financial Disclosure",
            "Changes in and Disagreements with Independent Auditors on Accounting and Financial Disclosure",
        ],
        ItemId::I9A => &["Controls and Procedures"],
        ItemId::I9B => &["Other Information"],
        ItemId::I10 => &[
            "Directors, Executive Officers and Corporate Governance",
            "Directors and Executive Officers of the Registrant",
        ],
        ItemId::I11 => &["Executive Compensation"],
        ItemId::I12 => &["Security Ownership of Certain Beneficial Owners and Management and Related Stockholder Matters"],
        ItemId::I13 => &[
            "Certain Relationships and Related Transactions, and Director Independence",
            "Certain Relationships and Related Transactions",
        ],
        ItemId::I14 => &["Principal Accountant Fees and Services", "Principal Accounting Fees and Services"],
        ItemId::I15 => &["Exhibits and Financial Statement Schedules", "Exhibits, Financial Statement Schedules"],
        ItemId::I16 => &["Form 10-K Summary"],
    }
}

fn topic_words(item: ItemId) -> &'static [&'static str] {
    match item {
        ItemId::I1 => &[
            "products",
            "customers",
            "employees",
            "competition",
            "segments",
            "manufacturing",
            "suppliers",
            "markets",
            "strategy",
            "services",
        ],
        ItemId::I1A => &[
            "risk",
            "adversely",
            "could",
            "uncertain",
            "volatility",
            "harm",
            "failure",
            "depend",
            "materially",
            "may",
        ],
        ItemId::I1B => &["unresolved", "staff", "comments", "none", "commission"],
        ItemId::I1C => &["cybersecurity", "threats", "incident", "information", "systems"],
        ItemId::I2 => &[
            "properties",
            "facilities",
            "square",
            "feet",
            "leased",
            "owned",
            "headquarters",
            "office",
            "warehouse",
        ],
        ItemId::I3 => &[
            "litigation",
            "lawsuit",
            "court",
            "plaintiffs",
            "claims",
            "proceedings",
            "settlement",
            "legal",
        ],
        ItemId::I4 => &["mine", "safety", "not", "applicable", "vote", "holders"],
        ItemId::I5 => &[
            "stock",
            "shares",
            "dividends",
            "holders",
            "exchange",
            "repurchase",
            "equity",
            "price",
        ],
        ItemId::I6 => &["selected", "data", "summary", "fiscal", "years", "historical"],
        ItemId::I7 => &[
            "revenues",
            "increased",
            "decreased",
            "compared",
            "liquidity",
            "capital",
            "results",
            "operations",
            "margin",
            "outlook",
        ],
        ItemId::I7A => &[
            "interest",
            "rate",
            "currency",
            "exposure",
            "hedging",
            "sensitivity",
            "market",
        ],
        ItemId::I8 => &[
            "balance",
            "sheets",
            "statements",
            "income",
            "cash",
            "flows",
            "notes",
            "consolidated",
            "audit",
            "assets",
        ],
        ItemId::I9 => &["changes", "disagreements", "accountants", "none"],
        ItemId::I9A => &[
            "disclosure",
            "controls",
            "procedures",
            "effective",
            "internal",
            "evaluation",
            "officer",
        ],
        ItemId::I9B => &["other", "information", "none", "reported"],
        ItemId::I10 => &[
            "directors",
            "officers",
            "governance",
            "ethics",
            "committee",
            "board",
            "proxy",
        ],
        ItemId::I11 => &["compensation", "salary", "bonus", "awards", "proxy", "incorporated"],
        ItemId::I12 => &["ownership", "beneficial", "owners", "plans", "securities", "proxy"],
        ItemId::I13 => &["relationships", "transactions", "independence", "related", "proxy"],
        ItemId::I14 => &["fees", "audit", "services", "accountant", "proxy"],
        ItemId::I15 => &[
            "exhibits",
            "schedules",
            "filed",
            "herewith",
            "incorporated",
            "reference",
            "agreement",
        ],
        ItemId::I16 => &["summary", "none", "omitted"],
    }
}

const FILLER: &[&str] = &[
    "the",
    "company",
    "our",
    "we",
    "and",
    "of",
    "in",
    "to",
    "for",
    "with",
    "a",
    "as",
    "on",
    "its",
    "by",
    "this",
    "year",
    "period",
    "related",
    "certain",
    "which",
    "such",
    "including",
    "other",
    "may",
    "significant",
    "during",
    "these",
    "also",
    "under",
    "are",
    "were",
    "be",
    "has",
    "have",
    "from",
    "at",
    "were",
    "annual",
    "report",
    "addition",
    "subsidiaries",
    "total",
    "new",
    "primarily",
    "general",
    "based",
    "continue",
];

const COVER: &[&str] = &[
    "UNITED STATES",
    "SECURITIES AND EXCHANGE COMMISSION",
    "Washington, D.C. 20549",
    "FORM 10-K",
    "ANNUAL REPORT PURSUANT TO SECTION 13 OR 15(d) OF THE SECURITIES EXCHANGE ACT OF 1934",
    "For the fiscal year ended December 31",
    "TRANSITION REPORT PURSUANT TO SECTION 13 OR 15(d) OF THE SECURITIES EXCHANGE ACT OF 1934",
    "Commission File Number 1-13087",
    "(Exact name of registrant as specified in its charter)",
    "(State or other jurisdiction of incorporation or organization)",
    "(Address of principal executive offices)",
    "Securities registered pursuant to Section 12(b) of the Act",
    "Indicate by check mark whether the registrant is a well-known seasoned issuer",
    "Indicate by check mark whether the registrant is a shell company",
    "DOCUMENTS INCORPORATED BY REFERENCE",
    "Forward-Looking Statements",
];

const SIGNATURE: &[&str] = &[
    "SIGNATURES",
    "Pursuant to the requirements of Section 13 or 15(d) of the Securities Exchange Act of 1934, the registrant has duly caused this report to be signed",
    "Chief Executive Officer",
    "Chief Financial Officer",
    "Principal Accounting Officer",
    "Director",
];

fn part_of(item: ItemId) -> &'static str {
    match item {
        i if i < ItemId::I5 => "PART I",
        i if i < ItemId::I10 => "PART II",
        i if i < ItemId::I15 => "PART III",
        _ => "PART IV",
    }
}

/// Knuth's multiplication method; fine for the small means used here.
fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = Float::exp(-lambda);
    let mut k = 0;
    let mut p = 1.0;
    loop {
        p *= rng.random::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

fn capitalize(word: &str) -> String {
    let mut c = word.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn sentence(rng: &mut ChaCha8Rng, topic: &[&str]) -> String {
    let n = rng.random_range(8..=30);
    let mut words: Vec<&str> = Vec::with_capacity(n);
    for _ in 0..n {
        let pool = if rng.random_bool(0.3) { topic } else { FILLER };
        words.push(pool.choose(rng).expect("non-empty pool"));
    }
    let mut s = capitalize(words[0]);
    for w in &words[1..] {
        s.push(' ');
        s.push_str(w);
    }
    s.push('.');
    s
}

fn heading(rng: &mut ChaCha8Rng, item: ItemId, upper: bool) -> String {
    let title = title_variants(item).choose(rng).expect("titles");
    let sep = *[". ", ".  ", ": ", " - ", ". "].choose(rng).expect("separators");
    let mut text = format!("Item {item}{sep}{title}");
    if !keep_line(&text) {
        text = format!("Item {item}. {title}");
    }
    if upper {
        text.to_uppercase()
    } else {
        text
    }
}

fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 step
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates one document; document `index` depends only on the seed and index.
pub fn generate_document(spec: &GeneratorSpec, index: usize) -> AnnotatedDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, index as u64));
    let mut texts: Vec<String> = Vec::new();
    let mut labels: Vec<LineLabel> = Vec::new();
    let push = |texts: &mut Vec<String>, labels: &mut Vec<LineLabel>, t: String, l: LineLabel| {
        texts.push(t);
        labels.push(l);
    };

    let included: Vec<&ItemSpec> = spec.items.iter().filter(|s| rng.random_bool(s.inclusion)).collect();
    let upper = rng.random_bool(spec.upper_case_prob);

    let outside = poisson(&mut rng, spec.outside_lines);
    let n_cover = (outside * 2 / 3).max(1);
    let n_signature = outside - n_cover.min(outside);
    for k in 0..n_cover {
        let line = if k < COVER.len() {
            COVER[k].to_string()
        } else {
            sentence(&mut rng, FILLER)
        };
        push(&mut texts, &mut labels, line, LineLabel::O);
    }

    if rng.random_bool(spec.toc_prob) && !included.is_empty() {
        let title = if upper {
            "TABLE OF CONTENTS"
        } else {
            "Table of Contents"
        };
        push(&mut texts, &mut labels, title.into(), LineLabel::O);
        let with_pages = rng.random_bool(0.5);
        let mut part = "";
        for (k, s) in included.iter().enumerate() {
            if part_of(s.item) != part {
                part = part_of(s.item);
                push(&mut texts, &mut labels, part.into(), LineLabel::O);
            }
            let mut row = heading(&mut rng, s.item, upper);
            if with_pages {
                let paged = format!("{row} {}", 3 + 4 * k);
                if keep_line(&paged) {
                    row = paged;
                }
            }
            push(&mut texts, &mut labels, row, LineLabel::O);
        }
    }

    let mut part = "";
    for s in &included {
        if part_of(s.item) != part {
            part = part_of(s.item);
            if rng.random_bool(0.7) {
                push(&mut texts, &mut labels, part.into(), LineLabel::O);
            }
        }
        let total = 1 + poisson(&mut rng, GeneratorSpec::expected_item_lines(s) - 1.0);
        push(
            &mut texts,
            &mut labels,
            heading(&mut rng, s.item, upper),
            LineLabel::B(s.item),
        );
        for _ in 1..total {
            let line = if rng.random_bool(spec.noise_rate) {
                "Table of Contents".to_string()
            } else {
                sentence(&mut rng, topic_words(s.item))
            };
            push(&mut texts, &mut labels, line, LineLabel::I(s.item));
        }
    }

    for k in 0..n_signature {
        let line = SIGNATURE
            .get(k)
            .map_or_else(|| sentence(&mut rng, FILLER), |s| s.to_string());
        push(&mut texts, &mut labels, line, LineLabel::O);
    }

    AnnotatedDocument::new(format!("synth-{}-{index:05}", spec.seed), number_lines(texts), labels)
        .expect("generated labels are valid by construction")
}

/// Generates `spec.n_docs` documents.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<AnnotatedDocument>, SpecError> {
    spec.validate()?;
    Ok((0..spec.n_docs).map(|i| generate_document(spec, i)).collect())
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of a line's lower-cased tokens and token bigrams
/// into `dim` buckets, scaled to unit length. Empty lines map to zeros.
pub fn pseudo_embedding(text: &str, dim: usize) -> Vec<f32> {
    let mut v = alloc::vec![0.0f64; dim];
    if dim == 0 {
        return Vec::new();
    }
    let toks: Vec<String> = tokens(text).collect();
    let mut add = |key: &[u8], weight: f64| {
        let h = fnv1a(key);
        let idx = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign * weight;
    };
    for t in &toks {
        add(t.as_bytes(), 1.0);
    }
    for pair in toks.windows(2) {
        add(format!("{}\u{1}{}", pair[0], pair[1]).as_bytes(), 0.5);
    }
    let norm = Float::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter().map(|x| (x / norm) as f32).collect()
    } else {
        v.iter().map(|&x| x as f32).collect()
    }
}

/// Pseudo-embeddings for every line of a document, row `t` for line `t`.
pub fn pseudo_embeddings(doc: &AnnotatedDocument, dim: usize) -> Vec<Vec<f32>> {
    doc.lines.iter().map(|l| pseudo_embedding(&l.text, dim)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::validate_label_sequence;

    #[test]
    fn deterministic_and_valid() {
        let spec = GeneratorSpec::reference(42, 30);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        for doc in &a {
            assert!(validate_label_sequence(&doc.labels).is_ok());
            for l in &doc.lines {
                assert!(keep_line(&l.text), "{}: {:?}", doc.doc_id, l.text);
            }
        }
        let other = generate(&GeneratorSpec::reference(43, 30)).unwrap();
        assert_ne!(a[0].labels, other[0].labels);
    }

    #[test]
    fn forced_inclusion() {
        let mut spec = GeneratorSpec::reference(1, 50);
        spec.items[0].inclusion = 1.0;
        for doc in generate(&spec).unwrap() {
            assert!(doc.labels.contains(&LineLabel::B(ItemId::I1)));
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = GeneratorSpec::reference(1, 1);
        spec.toc_prob = 1.5;
        assert!(generate(&spec).is_err());
        let mut spec = GeneratorSpec::reference(1, 1);
        spec.items.swap(0, 1);
        assert!(matches!(spec.validate(), Err(SpecError::ItemOrder(_))));
    }

    #[test]
    fn pseudo_embedding_is_unit_and_deterministic() {
        let a = pseudo_embedding("ITEM 1. BUSINESS", 64);
        assert_eq!(a.len(), 64);
        assert_eq!(a, pseudo_embedding("Item 1 business", 64));
        let norm: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!(pseudo_embedding("", 8).iter().all(|&x| x == 0.0));
    }
}
