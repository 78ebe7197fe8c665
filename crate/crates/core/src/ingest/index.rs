//! EDGAR full-index (`master.idx`) records.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// A calendar date as written in index files, `YYYY-MM-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FilingDate {
    pub year: u16,
    pub month: u8,
    pub day: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid date {0:?}")]
pub struct BadDate(pub String);

impl FilingDate {
    pub fn new(year: u16, month: u8, day: u8) -> Option<Self> {
        let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        let days = match month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            2 if leap => 29,
            2 => 28,
            _ => return None,
        };
        (1..=days).contains(&day).then_some(FilingDate { year, month, day })
    }
}

impl FromStr for FilingDate {
    type Err = BadDate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadDate(s.to_string());
        let mut parts = s.split('-');
        let (Some(y), Some(m), Some(d), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        if y.len() != 4 || m.len() != 2 || d.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        let day = d.parse().map_err(|_| bad())?;
        FilingDate::new(year, month, day).ok_or_else(bad)
    }
}

impl fmt::Display for FilingDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// One row of a full-index file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilingRef {
    pub cik: String,
    pub company_name: String,
    pub form_type: String,
    pub date_filed: FilingDate,
    /// Archive path relative to the EDGAR root, e.g. `edgar/data/320193/0000320193-20-000096.txt`.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("malformed index header at line {line}: {content:?}")]
    MalformedHeader { line: usize, content: String },
    #[error("index header ended without the CIK|Company Name|... column line")]
    MissingColumns,
    #[error("malformed index record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

const COLUMNS: [&str; 5] = ["CIK", "Company Name", "Form Type", "Date Filed", "Filename"];

fn is_column_line(line: &str) -> bool {
    let mut fields = line.split('|').map(str::trim);
    COLUMNS.iter().all(|c| fields.next() == Some(*c)) && fields.next().is_none()
}

/// Parses a pipe-delimited `master.idx` body and keeps the records whose form
/// type is in `form_types`, in file order. Line numbers in errors are 1-based.
pub fn parse_master_index(index_text: &str, form_types: &[&str]) -> Result<Vec<FilingRef>, IndexError> {
    let mut lines = index_text.lines().enumerate().map(|(i, l)| (i + 1, l));

    // preamble: "Key: value" lines and blanks, then the column line, then dashes
    loop {
        let Some((no, line)) = lines.next() else {
            return Err(IndexError::MissingColumns);
        };
        let trimmed = line.trim();
        if is_column_line(trimmed) {
            break;
        }
        if !(trimmed.is_empty() || trimmed.contains(':')) {
            return Err(IndexError::MalformedHeader {
                line: no,
                content: line.to_string(),
            });
        }
    }
    match lines.next() {
        Some((_, sep)) if !sep.trim().is_empty() && sep.trim().bytes().all(|b| b == b'-') => {}
        Some((no, sep)) => {
            return Err(IndexError::MalformedHeader {
                line: no,
                content: sep.to_string(),
            })
        }
        None => return Ok(Vec::new()),
    }

    let mut out = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').map(str::trim).collect();
        let bad = |reason: &str| IndexError::MalformedRecord {
            line: no,
            reason: reason.to_string(),
        };
        if fields.len() != 5 {
            return Err(bad("expected 5 '|'-delimited fields"));
        }
        let [cik, name, form, date, path] = [fields[0], fields[1], fields[2], fields[3], fields[4]];
        if cik.is_empty() || !cik.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad("CIK is not a digit string"));
        }
        if form.is_empty() {
            return Err(bad("empty form type"));
        }
        if path.is_empty() {
            return Err(bad("empty filename"));
        }
        let date_filed: FilingDate = date.parse().map_err(|_| bad("invalid filing date"))?;
        if !form_types.contains(&form) {
            continue;
        }
        out.push(FilingRef {
            cik: cik.to_string(),
            company_name: name.to_string(),
            form_type: form.to_string(),
            date_filed,
            path: path.to_string(),
        });
    }
    Ok(out)
}
