//! Per-theme keyword tables for side-by-side inspection of engines.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::csv_string;
use crate::corpus::Vocabulary;
use crate::engines::TopicWords;
use crate::error::Result;
use crate::scalar::Real;
use crate::themes::ResolvedSeeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub term: String,
    pub weight: f64,
    /// The term is a resolved seed of any theme.
    pub seed: bool,
    /// The term is a resolved seed of this theme.
    pub own_seed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordTable {
    pub engine: String,
    pub themes: Vec<String>,
    /// Ranked entries per theme, at most `n` each.
    pub keywords: Vec<Vec<KeywordEntry>>,
}

pub fn extract_keywords<F: Real>(
    engine: &str,
    model: &dyn TopicWords<F>,
    vocab: &Vocabulary,
    seeds: &ResolvedSeeds,
    n: usize,
) -> KeywordTable {
    let themes: Vec<String> = seeds.themes.iter().map(|t| t.theme.clone()).collect();
    let keywords = (0..model.n_themes().min(themes.len()))
        .map(|theme| {
            model
                .top_terms(theme, n)
                .into_iter()
                .map(|(id, w)| KeywordEntry {
                    term: vocab.text(id).to_owned(),
                    weight: w.as_f64(),
                    seed: seeds.is_seed(id),
                    own_seed: seeds.is_seed_of(theme, id),
                })
                .collect()
        })
        .collect();
    KeywordTable {
        engine: engine.to_owned(),
        themes,
        keywords,
    }
}

fn cell(entries: &[KeywordEntry]) -> String {
    entries
        .iter()
        .map(|e| if e.seed { format!("**{}**", e.term) } else { e.term.clone() })
        .collect::<Vec<_>>()
        .join(", ")
}

impl KeywordTable {
    pub fn to_markdown(&self) -> String {
        render_side_by_side(std::slice::from_ref(self))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["engine", "theme", "rank", "term", "weight", "seed", "own_seed"])?;
        for (theme, entries) in self.themes.iter().zip(&self.keywords) {
            for (rank, e) in entries.iter().enumerate() {
                w.write_record([
                    self.engine.as_str(),
                    theme,
                    &(rank + 1).to_string(),
                    &e.term,
                    &e.weight.to_string(),
                    &e.seed.to_string(),
                    &e.own_seed.to_string(),
                ])?;
            }
        }
        csv_string(w)
    }
}

/// Theme rows by engine columns; seed terms in bold.
pub fn render_side_by_side(tables: &[KeywordTable]) -> String {
    let mut out = String::new();
    let engines: Vec<&str> = tables.iter().map(|t| t.engine.as_str()).collect();
    let _ = writeln!(out, "| Theme | {} |", engines.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(tables.len()));
    let themes = tables.first().map(|t| t.themes.clone()).unwrap_or_default();
    for (i, theme) in themes.iter().enumerate() {
        let cells: Vec<String> = tables
            .iter()
            .map(|t| t.keywords.get(i).map(|e| cell(e)).unwrap_or_default())
            .collect();
        let _ = writeln!(out, "| {theme} | {} |", cells.join(" | "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{RawComment, TermId};
    use crate::pipeline::PreparedCorpus;
    use crate::themes::ThemeConfig;

    struct Fixed(Vec<Vec<(TermId, f64)>>);

    impl TopicWords<f64> for Fixed {
        fn n_themes(&self) -> usize {
            self.0.len()
        }
        fn ranked_terms(&self, theme: usize) -> Vec<(TermId, f64)> {
            self.0[theme].clone()
        }
    }

    fn corpus() -> PreparedCorpus<f64> {
        let raws: Vec<RawComment> = [
            "the nurse was kind and the hospital clean",
            "my wife helped with the garden",
            "the nurse and my wife talked",
            "hospital garden walk",
        ]
        .iter()
        .enumerate()
        .map(|(i, t)| RawComment::new(format!("c{i}"), *t))
        .collect();
        let themes = ThemeConfig::parse("Cancer Pathways\tnurse; hospital\nSocial Function\twife\n").unwrap();
        PreparedCorpus::prepare(&raws, &themes, Default::default(), 1).unwrap()
    }

    #[test]
    fn seeds_are_flagged_and_bold() {
        let c = corpus();
        let seeds = c.seeds(false).unwrap();
        let v = &c.vocab;
        let nurse = v.id("nurs").or_else(|| v.id("nurse")).unwrap();
        let garden = v.id("garden").unwrap();
        let wife = v.id("wife").unwrap();
        let model = Fixed(vec![vec![(nurse, 2.0), (garden, 1.0), (wife, 0.5)], vec![(wife, 1.0)]]);
        let t = extract_keywords("demo", &model, v, &seeds, 15);
        assert!(t.keywords[0][0].seed && t.keywords[0][0].own_seed);
        assert!(!t.keywords[0][1].seed);
        assert!(t.keywords[0][2].seed && !t.keywords[0][2].own_seed);
        let md = t.to_markdown();
        assert!(md.contains(&format!("**{}**, garden", v.text(nurse))), "{md}");
        assert!(t.to_csv().unwrap().starts_with("engine,theme,rank,term,weight,seed,own_seed\n"));
    }

    #[test]
    fn n_one_keeps_single_top_term() {
        let c = corpus();
        let seeds = c.seeds(false).unwrap();
        let model = Fixed(vec![vec![(0, 3.0), (1, 2.0)], vec![(2, 1.0), (3, 0.5)]]);
        let t = extract_keywords("demo", &model, &c.vocab, &seeds, 1);
        assert!(t.keywords.iter().all(|k| k.len() == 1));
        assert_eq!(t.keywords[0][0].term, c.vocab.text(0));
    }
}
