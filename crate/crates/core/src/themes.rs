//! Theme and seed-term configuration: loading, validation, and resolution of
//! seeds against a corpus vocabulary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{preprocess_seed_term, PreprocessOptions, SeedIssue, SeedKey, TermId, Vocabulary};
use crate::error::{Error, Result};

const DEFAULT_THEMES: &str = include_str!("default_themes.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeSpec {
    pub name: String,
    pub seeds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeConfig {
    pub themes: Vec<ThemeSpec>,
}

impl ThemeConfig {
    /// The shipped six-theme configuration.
    pub fn default_config() -> Self {
        Self::parse(DEFAULT_THEMES).expect("embedded theme config is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Parses either the tab-separated format or the JSON alternative.
    pub fn parse(src: &str) -> Result<Self> {
        if src.trim_start().starts_with('{') {
            let raw: ThemeConfig =
                serde_json::from_str(src).map_err(|e| Error::ThemeConfig(e.to_string()))?;
            return Self::new(raw.themes);
        }
        let mut themes = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (name, seeds) = line.split_once('\t').ok_or_else(|| {
                Error::ThemeConfig(format!("line {}: expected theme<TAB>seeds", i + 1))
            })?;
            themes.push(ThemeSpec {
                name: name.trim().to_owned(),
                seeds: seeds.split(';').map(str::to_owned).collect(),
            });
        }
        Self::new(themes)
    }

    /// Validates and normalises: trims seeds, collapses inner whitespace,
    /// drops empty entries and duplicate seeds within a theme.
    pub fn new(themes: Vec<ThemeSpec>) -> Result<Self> {
        if themes.is_empty() {
            return Err(Error::ThemeConfig("no themes".into()));
        }
        let mut out: Vec<ThemeSpec> = Vec::with_capacity(themes.len());
        for t in themes {
            if t.name.is_empty() {
                return Err(Error::ThemeConfig("empty theme name".into()));
            }
            if out.iter().any(|o| o.name == t.name) {
                return Err(Error::ThemeConfig(format!("duplicate theme {:?}", t.name)));
            }
            let mut seeds: Vec<String> = Vec::new();
            for s in &t.seeds {
                let words: Vec<&str> = s.split_whitespace().collect();
                if words.is_empty() {
                    continue;
                }
                if words.len() > 2 {
                    return Err(Error::ThemeConfig(format!(
                        "theme {:?}: seed {:?} has more than two words",
                        t.name, s
                    )));
                }
                let norm = words.join(" ");
                if !seeds.contains(&norm) {
                    seeds.push(norm);
                }
            }
            if seeds.is_empty() {
                return Err(Error::ThemeConfig(format!("theme {:?} has no seeds", t.name)));
            }
            out.push(ThemeSpec { name: t.name, seeds });
        }
        Ok(ThemeConfig { themes: out })
    }

    pub fn len(&self) -> usize {
        self.themes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.themes.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.themes.iter().map(|t| t.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.themes.iter().position(|t| t.name == name)
    }

    /// Canonical tab-separated form.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for t in &self.themes {
            s.push_str(&t.name);
            s.push('\t');
            s.push_str(&t.seeds.join(";"));
            s.push('\n');
        }
        s
    }

    pub fn sha256(&self) -> String {
        hex_digest(self.to_tsv().as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedSeed {
    pub seed: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeSeeds {
    pub theme: String,
    /// Vocabulary ids in first-seen order, without duplicates.
    pub terms: Vec<TermId>,
    /// Raw seed strings that contributed at least one resolved term.
    pub resolved_raw: Vec<String>,
    pub dropped: Vec<DroppedSeed>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedSeeds {
    pub themes: Vec<ThemeSeeds>,
    pub unigrams_only: bool,
}

impl ResolvedSeeds {
    pub fn len(&self) -> usize {
        self.themes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.themes.is_empty()
    }

    pub fn terms(&self, theme: usize) -> &[TermId] {
        &self.themes[theme].terms
    }

    pub fn is_seed_of(&self, theme: usize, term: TermId) -> bool {
        self.themes[theme].terms.contains(&term)
    }

    pub fn is_seed(&self, term: TermId) -> bool {
        self.themes.iter().any(|t| t.terms.contains(&term))
    }

    pub fn warnings(&self) -> Vec<String> {
        self.themes
            .iter()
            .flat_map(|t| {
                t.dropped
                    .iter()
                    .map(move |d| format!("theme {:?}: seed {:?} dropped ({})", t.theme, d.seed, d.reason))
            })
            .collect()
    }
}

/// Processed vocabulary keys of every seed, for forcing them into the vocabulary.
pub fn seed_keys(config: &ThemeConfig, options: &PreprocessOptions) -> Vec<String> {
    let mut keys: Vec<String> = config
        .themes
        .iter()
        .flat_map(|t| t.seeds.iter())
        .filter_map(|s| preprocess_seed_term(s, options).ok())
        .flat_map(|k: SeedKey| {
            let mut v = vec![k.key()];
            if k.is_bigram() {
                v.extend(k.tokens.iter().cloned());
            }
            v
        })
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

pub fn resolve_seeds(
    config: &ThemeConfig,
    vocab: &Vocabulary,
    options: &PreprocessOptions,
    unigrams_only: bool,
) -> Result<ResolvedSeeds> {
    let mut themes = Vec::with_capacity(config.len());
    for spec in &config.themes {
        let mut terms: Vec<TermId> = Vec::new();
        let mut resolved_raw = Vec::new();
        let mut dropped = Vec::new();
        for seed in &spec.seeds {
            let key = match preprocess_seed_term(seed, options) {
                Ok(k) => k,
                Err(SeedIssue::Empty) => {
                    dropped.push(DroppedSeed {
                        seed: seed.clone(),
                        reason: "removed by preprocessing".into(),
                    });
                    continue;
                }
                Err(SeedIssue::TooLong(toks)) => {
                    dropped.push(DroppedSeed {
                        seed: seed.clone(),
                        reason: format!("tokenises to {} tokens", toks.len()),
                    });
                    continue;
                }
            };
            let lookups: Vec<String> = if unigrams_only {
                key.tokens.clone()
            } else {
                vec![key.key()]
            };
            let ids: Vec<TermId> = lookups.iter().filter_map(|k| vocab.id(k)).collect();
            if ids.is_empty() {
                dropped.push(DroppedSeed {
                    seed: seed.clone(),
                    reason: format!("{:?} not in vocabulary", key.key()),
                });
                continue;
            }
            resolved_raw.push(seed.clone());
            for id in ids {
                if !terms.contains(&id) {
                    terms.push(id);
                }
            }
        }
        if terms.is_empty() {
            return Err(Error::UnanchoredTheme {
                theme: spec.name.clone(),
                dropped: dropped.into_iter().map(|d| d.seed).collect(),
            });
        }
        themes.push(ThemeSeeds {
            theme: spec.name.clone(),
            terms,
            resolved_raw,
            dropped,
        });
    }
    Ok(ResolvedSeeds { themes, unigrams_only })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bigrams, build_vocabulary, ProcessedDoc};

    #[test]
    fn shipped_default_has_six_themes() {
        let c = ThemeConfig::default_config();
        assert_eq!(c.len(), 6);
        assert_eq!(c.themes[0].name, "Cancer Pathways & Services");
        assert_eq!(c.themes[0].seeds.len(), 16);
        assert_eq!(c.themes[0].seeds[0], "radiotherapy");
        // duplicates in the source table collapse
        assert_eq!(c.themes[2].seeds.len(), 28);
        assert_eq!(c.themes[4].seeds.len(), 20);
        assert!(c.themes[1].seeds.contains(&"old age".to_string()));
    }

    #[test]
    fn duplicate_theme_and_long_seed_are_rejected() {
        let dup = "Daily Life\twalk\nDaily Life\tdrive\n";
        assert!(matches!(ThemeConfig::parse(dup), Err(Error::ThemeConfig(_))));
        let long = "Q\tquality of life index\n";
        assert!(matches!(ThemeConfig::parse(long), Err(Error::ThemeConfig(_))));
        assert!(ThemeConfig::parse("Q\t ; \n").is_err());
    }

    #[test]
    fn json_form_is_accepted() {
        let c = ThemeConfig::parse(r#"{"themes":[{"name":"A","seeds":["x","y z"]}]}"#).unwrap();
        assert_eq!(c.themes[0].seeds, ["x", "y z"]);
    }

    #[test]
    fn canonical_round_trip() {
        let c = ThemeConfig::default_config();
        let again = ThemeConfig::parse(&c.to_tsv()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_tsv(), c.to_tsv());
    }

    fn vocab_from(texts: &[&[&str]], forced: &[String]) -> Vocabulary {
        let docs: Vec<ProcessedDoc> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let tokens: Vec<String> = t.iter().map(|s| s.to_string()).collect();
                ProcessedDoc {
                    id: i.to_string(),
                    bigrams: bigrams(&tokens),
                    tokens,
                    gold: None,
                }
            })
            .collect();
        build_vocabulary(&docs, 1, forced).unwrap()
    }

    #[test]
    fn unigram_only_resolution_splits_bigrams() {
        let o = PreprocessOptions::default();
        let c = ThemeConfig::parse("Comorbidities\theart failure;copd\n").unwrap();
        let v = vocab_from(&[&["heart", "failure"], &["heart", "pain"]], &[]);
        let r = resolve_seeds(&c, &v, &o, true).unwrap();
        let got: Vec<&str> = r.terms(0).iter().map(|&t| v.text(t)).collect();
        assert_eq!(got, ["heart", "failure"]);
        assert_eq!(r.themes[0].dropped.len(), 1);
        assert_eq!(r.themes[0].dropped[0].seed, "copd");

        let r = resolve_seeds(&c, &v, &o, false).unwrap();
        let got: Vec<&str> = r.terms(0).iter().map(|&t| v.text(t)).collect();
        assert_eq!(got, ["heart failure"]);
        assert_eq!(r.warnings().len(), 1);
    }

    #[test]
    fn all_oov_theme_is_an_error() {
        let o = PreprocessOptions::default();
        let c = ThemeConfig::parse("A\tpain\nB\tcopd;asthma\n").unwrap();
        let v = vocab_from(&[&["pain", "stoma"]], &[]);
        match resolve_seeds(&c, &v, &o, false) {
            Err(Error::UnanchoredTheme { theme, dropped }) => {
                assert_eq!(theme, "B");
                assert_eq!(dropped.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }
}
