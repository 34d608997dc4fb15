use std::collections::HashMap;
use std::io::BufRead;
use std::sync::OnceLock;

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{normalize_authors, CorpusError, Diagnostic, ParseMode, ParseOutcome, Publication};

const RECORD_TAGS: [&[u8]; 2] = [b"article", b"inproceedings"];

// ISO Latin-1 names from dblp.dtd, code points 160..=255 in order.
const LATIN1: [&str; 96] = [
    "nbsp", "iexcl", "cent", "pound", "curren", "yen", "brvbar", "sect", "uml", "copy", "ordf", "laquo", "not", "shy",
    "reg", "macr", "deg", "plusmn", "sup2", "sup3", "acute", "micro", "para", "middot", "cedil", "sup1", "ordm",
    "raquo", "frac14", "frac12", "frac34", "iquest", "Agrave", "Aacute", "Acirc", "Atilde", "Auml", "Aring", "AElig",
    "Ccedil", "Egrave", "Eacute", "Ecirc", "Euml", "Igrave", "Iacute", "Icirc", "Iuml", "ETH", "Ntilde", "Ograve",
    "Oacute", "Ocirc", "Otilde", "Ouml", "times", "Oslash", "Ugrave", "Uacute", "Ucirc", "Uuml", "Yacute", "THORN",
    "szlig", "agrave", "aacute", "acirc", "atilde", "auml", "aring", "aelig", "ccedil", "egrave", "eacute", "ecirc",
    "euml", "igrave", "iacute", "icirc", "iuml", "eth", "ntilde", "ograve", "oacute", "ocirc", "otilde", "ouml",
    "divide", "oslash", "ugrave", "uacute", "ucirc", "uuml", "yacute", "thorn", "yuml",
];

fn entity_table() -> &'static HashMap<&'static str, String> {
    static TABLE: OnceLock<HashMap<&'static str, String>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut m: HashMap<&'static str, String> = LATIN1
            .iter()
            .enumerate()
            .map(|(i, name)| (*name, char::from_u32(160 + i as u32).unwrap().to_string()))
            .collect();
        for (name, value) in [("amp", "&"), ("lt", "<"), ("gt", ">"), ("quot", "\""), ("apos", "'")] {
            m.insert(name, value.to_string());
        }
        m
    })
}

fn resolve_entity(name: &str) -> Option<&'static str> {
    entity_table().get(name).map(String::as_str)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Field {
    Author,
    Year,
    Venue,
}

impl Field {
    fn from_tag(tag: &[u8]) -> Option<Field> {
        match tag {
            b"author" => Some(Field::Author),
            b"year" => Some(Field::Year),
            b"journal" | b"booktitle" => Some(Field::Venue),
            _ => None,
        }
    }
}

#[derive(Default)]
struct Pending {
    key: Option<String>,
    offset: u64,
    depth: usize,
    authors: Vec<String>,
    year: Option<String>,
    venue: Option<String>,
}

/// Streams `article` and `inproceedings` records out of a dblp-style XML dump.
///
/// Other elements are skipped. Named Latin-1 entities declared by the dblp
/// DTD are decoded along with the XML built-ins and numeric references.
pub fn parse_dblp_xml<R: BufRead>(input: R, mode: ParseMode) -> Result<ParseOutcome, CorpusError> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().check_end_names = true;

    let mut out = ParseOutcome::default();
    let mut buf = Vec::new();
    let mut depth = 0usize;
    let mut pending: Option<Pending> = None;
    let mut field: Option<(Field, String)> = None;
    let mut n_records = 0usize;

    loop {
        let offset = reader.buffer_position();
        let event = reader.read_event_into(&mut buf).map_err(|e| CorpusError::Xml {
            offset: reader.error_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => {
                depth += 1;
                let tag = e.name().as_ref().to_vec();
                if pending.is_none() && RECORD_TAGS.contains(&tag.as_slice()) {
                    pending = Some(start_record(&e, offset, depth));
                } else if let Some(p) = &pending {
                    if depth == p.depth + 1 {
                        field = Field::from_tag(&tag).map(|f| (f, String::new()));
                    }
                }
            }
            Event::Empty(e) => {
                if pending.is_none() && RECORD_TAGS.contains(&e.name().as_ref()) {
                    let record = start_record(&e, offset, depth + 1);
                    n_records += 1;
                    finish_record(record, n_records, mode, &mut out)?;
                }
            }
            Event::Text(t) => {
                if let Some((_, text)) = field.as_mut() {
                    match t.unescape_with(resolve_entity) {
                        Ok(s) => text.push_str(&s),
                        Err(e) => {
                            if mode == ParseMode::Strict {
                                return Err(CorpusError::Xml { offset, message: e.to_string() });
                            }
                            out.diagnostics.push(Diagnostic {
                                line: None,
                                offset: Some(offset),
                                record: pending.as_ref().and_then(|p| p.key.clone()),
                                message: format!("kept raw text: {e}"),
                            });
                            text.push_str(&String::from_utf8_lossy(&t));
                        }
                    }
                }
            }
            Event::CData(t) => {
                if let Some((_, text)) = field.as_mut() {
                    text.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(_) => {
                depth -= 1;
                if let Some(p) = pending.as_mut() {
                    if depth == p.depth {
                        if let Some((kind, text)) = field.take() {
                            let text = text.trim().to_string();
                            match kind {
                                Field::Author => p.authors.push(text),
                                Field::Year => p.year = Some(text),
                                Field::Venue => p.venue = p.venue.take().or(Some(text)),
                            }
                        }
                    } else if depth < p.depth {
                        let record = pending.take().unwrap();
                        n_records += 1;
                        finish_record(record, n_records, mode, &mut out)?;
                    }
                }
            }
            Event::Eof => {
                if depth > 0 {
                    return Err(CorpusError::Xml {
                        offset: reader.buffer_position(),
                        message: format!("unexpected end of input with {depth} unclosed element(s)"),
                    });
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok(out)
}

fn start_record(e: &quick_xml::events::BytesStart<'_>, offset: u64, depth: usize) -> Pending {
    let key = e
        .try_get_attribute("key")
        .ok()
        .flatten()
        .and_then(|a| a.unescape_value().ok().map(|v| v.into_owned()));
    Pending { key, offset, depth, ..Default::default() }
}

fn finish_record(p: Pending, ordinal: usize, mode: ParseMode, out: &mut ParseOutcome) -> Result<(), CorpusError> {
    let id = p.key.clone().unwrap_or_else(|| format!("record-{ordinal}"));
    let mut authors = p.authors;
    normalize_authors(&mut authors);
    let problem = match p.year.as_deref().map(str::parse::<i32>) {
        None => Some("missing year".to_string()),
        Some(Err(_)) => Some(format!("unparsable year {:?}", p.year.unwrap_or_default())),
        Some(Ok(_)) if authors.is_empty() => Some("empty author list".to_string()),
        Some(Ok(year)) => {
            out.publications.push(Publication { id: id.clone(), year, authors, venue: p.venue });
            None
        }
    };
    if let Some(message) = problem {
        if mode == ParseMode::Strict {
            return Err(CorpusError::Xml { offset: p.offset, message: format!("{id}: {message}") });
        }
        out.rejected += 1;
        out.diagnostics.push(Diagnostic { line: None, offset: Some(p.offset), record: Some(id), message });
    }
    Ok(())
}
