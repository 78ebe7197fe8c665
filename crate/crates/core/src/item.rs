//! The closed 10-K item taxonomy and the per-line label alphabet.

use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// One of the 22 numbered 10-K items, ordered by their usual position in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ItemId {
    I1,
    I1A,
    I1B,
    I1C,
    I2,
    I3,
    I4,
    I5,
    I6,
    I7,
    I7A,
    I8,
    I9,
    I9A,
    I9B,
    I10,
    I11,
    I12,
    I13,
    I14,
    I15,
    I16,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown item identifier {0:?}")]
pub struct UnknownItem(pub alloc::string::String);

impl ItemId {
    /// All items in canonical order.
    pub const ALL: [ItemId; 22] = [
        ItemId::I1,
        ItemId::I1A,
        ItemId::I1B,
        ItemId::I1C,
        ItemId::I2,
        ItemId::I3,
        ItemId::I4,
        ItemId::I5,
        ItemId::I6,
        ItemId::I7,
        ItemId::I7A,
        ItemId::I8,
        ItemId::I9,
        ItemId::I9A,
        ItemId::I9B,
        ItemId::I10,
        ItemId::I11,
        ItemId::I12,
        ItemId::I13,
        ItemId::I14,
        ItemId::I15,
        ItemId::I16,
    ];

    /// Position in the canonical sequence, 0-based.
    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<ItemId> {
        Self::ALL.get(ordinal).copied()
    }

    /// Canonical identifier as printed after "Item", e.g. `"1A"`.
    pub fn as_str(self) -> &'static str {
        match self {
            ItemId::I1 => "1",
            ItemId::I1A => "1A",
            ItemId::I1B => "1B",
            ItemId::I1C => "1C",
            ItemId::I2 => "2",
            ItemId::I3 => "3",
            ItemId::I4 => "4",
            ItemId::I5 => "5",
            ItemId::I6 => "6",
            ItemId::I7 => "7",
            ItemId::I7A => "7A",
            ItemId::I8 => "8",
            ItemId::I9 => "9",
            ItemId::I9A => "9A",
            ItemId::I9B => "9B",
            ItemId::I10 => "10",
            ItemId::I11 => "11",
            ItemId::I12 => "12",
            ItemId::I13 => "13",
            ItemId::I14 => "14",
            ItemId::I15 => "15",
            ItemId::I16 => "16",
        }
    }

    /// The current SEC heading title for the item.
    pub fn title(self) -> &'static str {
        match self {
            ItemId::I1 => "Business",
            ItemId::I1A => "Risk Factors",
            ItemId::I1B => "Unresolved Staff Comments",
            ItemId::I1C => "Cybersecurity",
            ItemId::I2 => "Properties",
            ItemId::I3 => "Legal Proceedings",
            ItemId::I4 => "Mine Safety Disclosures",
            ItemId::I5 => "Market for Registrant's Common Equity, Related Stockholder Matters and Issuer Purchases of Equity Securities",
            ItemId::I6 => "Selected Financial Data",
            ItemId::I7 => "Management's Discussion and Analysis of Financial Condition and Results of Operations",
            ItemId::I7A => "Quantitative and Qualitative Disclosures About Market Risk",
            ItemId::I8 => "Financial Statements and Supplementary Data",
            ItemId::I9 => "Changes in and Disagreements with Accountants on Accounting and Financial Disclosure",
            ItemId::I9A => "Controls and Procedures",
            ItemId::I9B => "Other Information",
            ItemId::I10 => "Directors, Executive Officers and Corporate Governance",
            ItemId::I11 => "Executive Compensation",
            ItemId::I12 => "Security Ownership of Certain Beneficial Owners and Management and Related Stockholder Matters",
            ItemId::I13 => "Certain Relationships and Related Transactions, and Director Independence",
            ItemId::I14 => "Principal Accountant Fees and Services",
            ItemId::I15 => "Exhibits and Financial Statement Schedules",
            ItemId::I16 => "Form 10-K Summary",
        }
    }

    /// Lower-case keywords that commonly appear in the item's heading,
    /// including older title wordings.
    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            ItemId::I1 => &["business"],
            ItemId::I1A => &["risk", "factors"],
            ItemId::I1B => &["unresolved", "staff", "comments"],
            ItemId::I1C => &["cybersecurity"],
            ItemId::I2 => &["properties", "property"],
            ItemId::I3 => &["legal", "proceedings"],
            ItemId::I4 => &[
                "mine",
                "safety",
                "submission",
                "matters",
                "vote",
                "security",
                "holders",
                "removed",
                "reserved",
            ],
            ItemId::I5 => &["market", "registrant", "common", "equity", "stockholder", "shareholder"],
            ItemId::I6 => &["selected", "financial", "data", "reserved"],
            ItemId::I7 => &["management", "discussion", "analysis"],
            ItemId::I7A => &["quantitative", "qualitative", "disclosures", "market", "risk"],
            ItemId::I8 => &["financial", "statements", "supplementary", "data"],
            ItemId::I9 => &["changes", "disagreements", "accountants", "auditors", "accounting"],
            ItemId::I9A => &["controls", "procedures"],
            ItemId::I9B => &["other", "information"],
            ItemId::I10 => &["directors", "executive", "officers", "governance"],
            ItemId::I11 => &["executive", "compensation"],
            ItemId::I12 => &["security", "ownership", "beneficial", "owners"],
            ItemId::I13 => &["certain", "relationships", "related", "transactions"],
            ItemId::I14 => &["principal", "accountant", "accounting", "fees", "services"],
            ItemId::I15 => &["exhibits", "financial", "statement", "schedules"],
            ItemId::I16 => &["form", "10-k", "summary"],
        }
    }

    /// Parses an item number as written in a heading: `"1a"`, `"7A"`, `"10"`.
    pub fn parse_loose(s: &str) -> Option<ItemId> {
        let s = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|item| item.as_str().eq_ignore_ascii_case(s))
    }
}

impl PartialOrd for ItemId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ItemId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ordinal().cmp(&other.ordinal())
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ItemId {
    type Err = UnknownItem;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|item| item.as_str() == s)
            .ok_or_else(|| UnknownItem(s.into()))
    }
}

/// Modified-BIO line label: `O`, or `B`/`I` tagged with an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LineLabel {
    O,
    B(ItemId),
    I(ItemId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid line label {0:?}")]
pub struct BadLabel(pub alloc::string::String);

impl LineLabel {
    pub fn item(self) -> Option<ItemId> {
        match self {
            LineLabel::O => None,
            LineLabel::B(item) | LineLabel::I(item) => Some(item),
        }
    }

    pub fn is_begin(self) -> bool {
        matches!(self, LineLabel::B(_))
    }

    /// Dense index in the full 45-label alphabet: `O`, then `B`/`I` pairs in item order.
    pub fn index(self) -> usize {
        match self {
            LineLabel::O => 0,
            LineLabel::B(item) => 1 + 2 * item.ordinal(),
            LineLabel::I(item) => 2 + 2 * item.ordinal(),
        }
    }

    /// Every label, in [`LineLabel::index`] order.
    pub fn alphabet() -> impl Iterator<Item = LineLabel> {
        core::iter::once(LineLabel::O).chain(
            ItemId::ALL
                .into_iter()
                .flat_map(|item| [LineLabel::B(item), LineLabel::I(item)]),
        )
    }
}

impl fmt::Display for LineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineLabel::O => f.write_str("O"),
            LineLabel::B(item) => write!(f, "B{item}"),
            LineLabel::I(item) => write!(f, "I{item}"),
        }
    }
}

impl FromStr for LineLabel {
    type Err = BadLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadLabel(s.into());
        if s == "O" {
            return Ok(LineLabel::O);
        }
        let (tag, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let item: ItemId = rest.parse().map_err(|_| bad())?;
        match tag {
            "B" => Ok(LineLabel::B(item)),
            "I" => Ok(LineLabel::I(item)),
            _ => Err(bad()),
        }
    }
}
