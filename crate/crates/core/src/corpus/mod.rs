//! Bibliographic records, per-researcher timelines and dataset slices.

mod dblp;
mod jsonl;
mod slice;
mod timeline;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dblp::parse_dblp_xml;
pub use jsonl::{parse_jsonl, to_jsonl_line, write_jsonl};
pub use slice::{slice_dataset, DatasetSlice, Role};
pub use timeline::{build_timelines, AuthorTimeline, Timelines, YearCounts};
pub use window::WindowSpec;

/// Publications with more authors than this are dropped before timelines are built.
pub const DEFAULT_MAX_AUTHORS: usize = 80;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("invalid window: {0}")]
    Window(String),
    #[error("{0} slice is empty")]
    EmptySlice(Role),
}

/// One bibliographic record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    pub year: i32,
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
}

impl Publication {
    pub fn new(id: impl Into<String>, year: i32, authors: &[&str]) -> Self {
        Publication {
            id: id.into(),
            year,
            authors: authors.iter().map(|a| a.to_string()).collect(),
            venue: None,
        }
    }
}

/// Whether malformed records abort the parse or are skipped and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

/// A recoverable problem found while reading a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// 1-based line for line-oriented input.
    pub line: Option<usize>,
    /// Byte offset for XML input.
    pub offset: Option<u64>,
    pub record: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(offset) = self.offset {
            write!(f, "byte {offset}: ")?;
        }
        if let Some(record) = &self.record {
            write!(f, "{record}: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub publications: Vec<Publication>,
    pub diagnostics: Vec<Diagnostic>,
    /// Records that were dropped (not counting duplicate-author fixes).
    pub rejected: usize,
}

/// Counts reported by the ingest stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub parsed: usize,
    pub rejected: usize,
    pub filtered: usize,
    pub retained: usize,
    pub diagnostics: usize,
}

/// Trims author names, drops blanks, and removes repeated names keeping the first.
/// Returns how many entries were removed.
pub(crate) fn normalize_authors(authors: &mut Vec<String>) -> usize {
    let before = authors.len();
    let mut seen = std::collections::HashSet::new();
    let mut kept = Vec::with_capacity(authors.len());
    for a in authors.drain(..) {
        let t = a.trim();
        if t.is_empty() {
            continue;
        }
        if seen.insert(t.to_string()) {
            kept.push(t.to_string());
        }
    }
    *authors = kept;
    before - authors.len()
}

/// Keeps publications with at most `max_authors` authors, preserving order.
pub fn filter_publications(pubs: Vec<Publication>, max_authors: usize) -> Vec<Publication> {
    pubs.into_iter().filter(|p| p.authors.len() <= max_authors).collect()
}
