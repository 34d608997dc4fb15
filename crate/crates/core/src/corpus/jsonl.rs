use std::io::{BufRead, Write};

use serde::Deserialize;

use super::{normalize_authors, CorpusError, Diagnostic, ParseMode, ParseOutcome, Publication};

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    year: i32,
    authors: Vec<String>,
    #[serde(default)]
    venue: Option<String>,
}

/// Reads one JSON object per line. Blank lines and `#` comment lines are ignored.
pub fn parse_jsonl<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParseOutcome, CorpusError> {
    let mut out = ParseOutcome::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let problem = match serde_json::from_str::<RawRecord>(text) {
            Ok(raw) => {
                let mut authors = raw.authors;
                let removed = normalize_authors(&mut authors);
                if authors.is_empty() {
                    Some((Some(raw.id), "empty author list".to_string()))
                } else {
                    if removed > 0 {
                        out.diagnostics.push(Diagnostic {
                            line: Some(line_no),
                            offset: None,
                            record: Some(raw.id.clone()),
                            message: format!("removed {removed} blank or duplicate author entries"),
                        });
                    }
                    out.publications.push(Publication {
                        id: raw.id,
                        year: raw.year,
                        authors,
                        venue: raw.venue,
                    });
                    None
                }
            }
            Err(e) => Some((None, e.to_string())),
        };
        if let Some((record, message)) = problem {
            if mode == ParseMode::Strict {
                return Err(CorpusError::Line { line: line_no, message });
            }
            out.rejected += 1;
            out.diagnostics.push(Diagnostic { line: Some(line_no), offset: None, record, message });
        }
    }
    Ok(out)
}

/// Canonical single-line encoding: `id`, `year`, `authors`, then `venue` when present.
pub fn to_jsonl_line(p: &Publication) -> String {
    serde_json::to_string(p).expect("publication serializes")
}

pub fn write_jsonl<W: Write>(mut w: W, pubs: &[Publication]) -> std::io::Result<()> {
    for p in pubs {
        writeln!(w, "{}", to_jsonl_line(p))?;
    }
    Ok(())
}
