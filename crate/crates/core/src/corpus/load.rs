use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::RawComment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// `.csv` selects CSV, anything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    text: String,
    #[serde(default)]
    gold: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct GoldRecord {
    id: String,
    #[serde(default)]
    gold: Option<Vec<String>>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RawComment>> {
    let file = File::open(path)?;
    match format {
        CorpusFormat::Jsonl => parse_corpus_jsonl(BufReader::new(file)),
        CorpusFormat::Csv => parse_corpus_csv(file),
    }
}

fn check_unique(seen: &mut HashSet<String>, id: &str, line: usize) -> Result<()> {
    if id.is_empty() {
        return Err(Error::parse(line, "empty id"));
    }
    if !seen.insert(id.to_owned()) {
        return Err(Error::DuplicateId {
            id: id.to_owned(),
            line,
        });
    }
    Ok(())
}

pub fn parse_corpus_jsonl<R: BufRead>(reader: R) -> Result<Vec<RawComment>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        check_unique(&mut seen, &rec.id, line_no)?;
        out.push(RawComment {
            id: rec.id,
            text: rec.text,
            gold: rec.gold.map(|g| g.into_iter().collect()),
        });
    }
    Ok(out)
}

/// The gold cell is `;`-separated. An empty cell means unlabelled; the
/// literal `none` means labelled with no themes.
fn parse_gold_cell(cell: &str) -> Option<BTreeSet<String>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    if cell.eq_ignore_ascii_case("none") {
        return Some(BTreeSet::new());
    }
    Some(
        cell.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect(),
    )
}

pub fn parse_corpus_csv<R: Read>(reader: R) -> Result<Vec<RawComment>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("id").ok_or_else(|| Error::parse(1, "missing column \"id\""))?;
    let text_col = col("text").ok_or_else(|| Error::parse(1, "missing column \"text\""))?;
    let gold_col = col("gold");
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = rec
            .get(id_col)
            .ok_or_else(|| Error::parse(line, "missing id field"))?;
        let text = rec
            .get(text_col)
            .ok_or_else(|| Error::parse(line, "missing text field"))?;
        check_unique(&mut seen, id, line)?;
        out.push(RawComment {
            id: id.to_owned(),
            text: text.to_owned(),
            gold: gold_col.and_then(|c| rec.get(c)).and_then(parse_gold_cell),
        });
    }
    Ok(out)
}

/// Reads gold label sets keyed by document id. Accepts the corpus formats
/// with the `text` field optional; records without gold are skipped.
pub fn load_gold(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut out = BTreeMap::new();
    match CorpusFormat::from_path(path) {
        CorpusFormat::Csv => {
            for c in parse_corpus_csv(File::open(path)?)? {
                if let Some(g) = c.gold {
                    out.insert(c.id, g);
                }
            }
        }
        CorpusFormat::Jsonl => {
            let mut seen = HashSet::new();
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: GoldRecord =
                    serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
                check_unique(&mut seen, &rec.id, i + 1)?;
                if let Some(g) = rec.gold {
                    out.insert(rec.id, g.into_iter().collect());
                }
            }
        }
    }
    Ok(out)
}

pub fn write_corpus_jsonl<W: Write>(mut w: W, comments: &[RawComment]) -> Result<()> {
    for c in comments {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
