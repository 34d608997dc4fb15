use std::collections::{BTreeMap, HashMap, HashSet};

use super::{CorpusError, Publication};

/// Activity of one researcher in one calendar year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearCounts {
    pub year: i32,
    pub pubs: u32,
    /// Coauthors seen for the first time this year.
    pub new_coauthors: u32,
}

/// Yearly publication and new-coauthor counts for one researcher.
///
/// Only years with at least one publication are stored; a new coauthor
/// always comes with a publication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorTimeline {
    pub author: String,
    records: Vec<YearCounts>,
}

impl AuthorTimeline {
    /// Builds a timeline from yearly records. Records are sorted and merged by year.
    pub fn from_records(author: impl Into<String>, mut records: Vec<YearCounts>) -> Self {
        records.sort_by_key(|r| r.year);
        let mut merged: Vec<YearCounts> = Vec::with_capacity(records.len());
        for r in records {
            match merged.last_mut() {
                Some(last) if last.year == r.year => {
                    last.pubs += r.pubs;
                    last.new_coauthors += r.new_coauthors;
                }
                _ => merged.push(r),
            }
        }
        merged.retain(|r| r.pubs > 0 || r.new_coauthors > 0);
        AuthorTimeline { author: author.into(), records: merged }
    }

    pub fn records(&self) -> &[YearCounts] {
        &self.records
    }

    pub fn first_year(&self) -> Option<i32> {
        self.records.first().map(|r| r.year)
    }

    pub fn pubs_by_year(&self) -> BTreeMap<i32, u32> {
        self.records.iter().map(|r| (r.year, r.pubs)).collect()
    }

    pub fn new_coauthors_by_year(&self) -> BTreeMap<i32, u32> {
        self.records.iter().map(|r| (r.year, r.new_coauthors)).collect()
    }

    fn sum_between(&self, after: i32, through: i32, f: impl Fn(&YearCounts) -> u32) -> u32 {
        self.records
            .iter()
            .filter(|r| r.year > after && r.year <= through)
            .map(f)
            .sum()
    }

    /// Publications in the half-open year range `(after, through]`.
    pub fn pubs_between(&self, after: i32, through: i32) -> u32 {
        self.sum_between(after, through, |r| r.pubs)
    }

    /// New coauthors in `(after, through]`.
    pub fn new_coauthors_between(&self, after: i32, through: i32) -> u32 {
        self.sum_between(after, through, |r| r.new_coauthors)
    }

    /// Cumulative publications h(t) up to and including year `t`.
    pub fn pubs_through(&self, t: i32) -> u32 {
        self.pubs_between(i32::MIN, t)
    }

    /// Cumulative distinct coauthors k(t) up to and including year `t`.
    pub fn coauthors_through(&self, t: i32) -> u32 {
        self.new_coauthors_between(i32::MIN, t)
    }

    pub fn pubs_in_year(&self, y: i32) -> u32 {
        self.pubs_between(y - 1, y)
    }

    pub fn new_coauthors_in_year(&self, y: i32) -> u32 {
        self.new_coauthors_between(y - 1, y)
    }
}

/// Timelines of every author appearing in a corpus window `[start, end]`.
#[derive(Debug, Clone, Default)]
pub struct Timelines {
    pub start: i32,
    pub end: i32,
    pub authors: BTreeMap<String, AuthorTimeline>,
    /// Publications dropped for falling outside the window.
    pub excluded: usize,
}

impl Timelines {
    pub fn len(&self) -> usize {
        self.authors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.authors.is_empty()
    }

    pub fn get(&self, author: &str) -> Option<&AuthorTimeline> {
        self.authors.get(author)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AuthorTimeline> {
        self.authors.values()
    }

    /// Keeps only researchers whose identifier starts with `prefix`.
    pub fn retain_prefix(&mut self, prefix: &str) {
        self.authors.retain(|id, _| id.starts_with(prefix));
    }
}

/// Groups publications in `[start, end]` into per-author timelines.
///
/// A coauthor is counted as new in the first year the pair co-publishes and
/// never again, however many papers they share that year or later.
pub fn build_timelines(pubs: &[Publication], start: i32, end: i32) -> Result<Timelines, CorpusError> {
    if start > end {
        return Err(CorpusError::Window(format!("corpus window [{start}, {end}] is empty")));
    }
    let mut order: Vec<&Publication> = pubs.iter().filter(|p| p.year >= start && p.year <= end).collect();
    let excluded = pubs.len() - order.len();
    order.sort_by_key(|p| p.year);

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    let mut seen: Vec<HashSet<usize>> = Vec::new();
    let mut records: Vec<Vec<YearCounts>> = Vec::new();
    let mut members: Vec<usize> = Vec::new();

    for p in order {
        members.clear();
        for a in &p.authors {
            let id = *ids.entry(a.as_str()).or_insert_with(|| {
                names.push(a.as_str());
                seen.push(HashSet::new());
                records.push(Vec::new());
                names.len() - 1
            });
            members.push(id);
        }
        members.sort_unstable();
        members.dedup();
        for &a in &members {
            let fresh = members.iter().filter(|&&b| b != a).filter(|&&b| seen[a].insert(b)).count() as u32;
            let recs = &mut records[a];
            match recs.last_mut() {
                Some(last) if last.year == p.year => {
                    last.pubs += 1;
                    last.new_coauthors += fresh;
                }
                _ => recs.push(YearCounts { year: p.year, pubs: 1, new_coauthors: fresh }),
            }
        }
    }

    let authors = names
        .into_iter()
        .zip(records)
        .map(|(name, recs)| (name.to_string(), AuthorTimeline { author: name.to_string(), records: recs }))
        .collect();
    Ok(Timelines { start, end, authors, excluded })
}
