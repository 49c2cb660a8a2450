//! Comment ingestion and the text preprocessing pipeline.
//!
//! The pipeline order is fixed: contraction expansion, lowercasing,
//! tokenisation on non-alphanumerics, optional spelling correction, stopword
//! removal, stemming, then bigram formation from adjacent surviving tokens.
//! Documents left with one token or fewer are removed.

mod load;
mod spell;
mod text;
mod tfidf;
mod vocab;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use load::{load_corpus, load_gold, parse_corpus_csv, parse_corpus_jsonl, write_corpus_jsonl, CorpusFormat};
pub use spell::SpellCorrector;
pub use text::{
    bigrams, default_contractions, default_stopwords, expand_contractions, tokenize, TokenStemmer,
    CONTRACTIONS_VERSION, STOPWORDS_VERSION,
};
pub use tfidf::{tfidf, TfIdfMatrix};
pub use vocab::{build_vocabulary, EncodedDoc, Term, TermId, TermKind, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawComment {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<BTreeSet<String>>,
}

impl RawComment {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawComment {
            id: id.into(),
            text: text.into(),
            gold: None,
        }
    }

    pub fn with_gold<I, S>(mut self, gold: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.gold = Some(gold.into_iter().map(Into::into).collect());
        self
    }
}

/// A comment that survived preprocessing: at least two unigram tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedDoc {
    pub id: String,
    pub tokens: Vec<String>,
    pub bigrams: Vec<String>,
    pub gold: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preprocessed {
    Doc(ProcessedDoc),
    Removed { id: String },
}

impl Preprocessed {
    pub fn into_doc(self) -> Option<ProcessedDoc> {
        match self {
            Preprocessed::Doc(d) => Some(d),
            Preprocessed::Removed { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub stopwords: HashSet<String>,
    pub contractions: HashMap<String, String>,
    pub stem: bool,
    pub spell: Option<SpellCorrector>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            stopwords: default_stopwords(),
            contractions: default_contractions(),
            stem: true,
            spell: None,
        }
    }
}

impl PreprocessOptions {
    /// Enables spelling correction using token frequencies of `raws`.
    pub fn with_spell_correction(mut self, raws: &[RawComment], lexicon: HashSet<String>) -> Self {
        let toks: Vec<String> = raws.iter().flat_map(|r| self.lowercase_tokens(&r.text)).collect();
        self.spell = Some(SpellCorrector::from_tokens(toks.iter().map(String::as_str), lexicon));
        self
    }

    fn lowercase_tokens(&self, text: &str) -> Vec<String> {
        let expanded = expand_contractions(text, &self.contractions);
        tokenize(&expanded.to_lowercase())
    }

    /// Runs every stage except bigram formation and the length filter.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let stemmer = TokenStemmer;
        let mut toks = self.lowercase_tokens(text);
        if let Some(sc) = &self.spell {
            for t in toks.iter_mut() {
                *t = sc.correct(t);
            }
        }
        toks.retain(|t| !self.stopwords.contains(t));
        if self.stem {
            for t in toks.iter_mut() {
                *t = stemmer.stem(t);
            }
            // a stem can coincide with a stopword ("ours" -> "our")
            toks.retain(|t| !t.is_empty() && !self.stopwords.contains(t));
        }
        toks
    }
}

pub fn preprocess(raw: &RawComment, options: &PreprocessOptions) -> Preprocessed {
    let tokens = options.tokens(&raw.text);
    if tokens.len() <= 1 {
        return Preprocessed::Removed { id: raw.id.clone() };
    }
    Preprocessed::Doc(ProcessedDoc {
        id: raw.id.clone(),
        bigrams: bigrams(&tokens),
        tokens,
        gold: raw.gold.clone(),
    })
}

/// A seed term after preprocessing: one or two tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeedKey {
    pub tokens: Vec<String>,
}

impl SeedKey {
    /// Vocabulary key: the token itself, or both tokens joined by a space.
    pub fn key(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_bigram(&self) -> bool {
        self.tokens.len() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedIssue {
    /// Every word was removed by the pipeline.
    Empty,
    /// Tokenisation produced more than two tokens.
    TooLong(Vec<String>),
}

pub fn preprocess_seed_term(term: &str, options: &PreprocessOptions) -> Result<SeedKey, SeedIssue> {
    let tokens = options.tokens(term);
    match tokens.len() {
        0 => Err(SeedIssue::Empty),
        1 | 2 => Ok(SeedKey { tokens }),
        _ => Err(SeedIssue::TooLong(tokens)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Preprocessed {
        preprocess(&RawComment::new("d", text), &PreprocessOptions::default())
    }

    #[test]
    fn stopwords_and_stemming_can_remove_a_comment() {
        assert_eq!(doc("I've been worried"), Preprocessed::Removed { id: "d".into() });
        assert_eq!(doc("ok"), Preprocessed::Removed { id: "d".into() });
        assert_eq!(doc(""), Preprocessed::Removed { id: "d".into() });
    }

    #[test]
    fn bigrams_come_from_adjacent_surviving_tokens() {
        let d = doc("bowel movement pain daily").into_doc().unwrap();
        assert_eq!(d.tokens, ["bowel", "movement", "pain", "daili"]);
        assert_eq!(d.bigrams, ["bowel movement", "movement pain", "pain daili"]);

        let d = doc("My bowel and the movement").into_doc().unwrap();
        assert_eq!(d.bigrams, ["bowel movement"]);
    }

    #[test]
    fn seeds_follow_the_same_pipeline() {
        let o = PreprocessOptions::default();
        assert_eq!(preprocess_seed_term("peripheral neuropathy", &o).unwrap().key(), "peripher neuropathi");
        assert_eq!(preprocess_seed_term("pain", &o).unwrap().key(), "pain");
        assert_eq!(preprocess_seed_term("old age", &o).unwrap().key(), "old age");
        assert_eq!(preprocess_seed_term("the", &o), Err(SeedIssue::Empty));
        assert!(matches!(preprocess_seed_term("long-term check-up", &o), Err(SeedIssue::TooLong(_))));
    }

    #[test]
    fn spell_correction_is_off_by_default_and_applies_before_stopwords() {
        let raws: Vec<RawComment> = (0..6)
            .map(|i| RawComment::new(format!("c{i}"), "stoma pain"))
            .chain(std::iter::once(RawComment::new("typo", "stomaa pian")))
            .collect();
        let plain = PreprocessOptions::default();
        assert_eq!(preprocess(&raws[6], &plain).into_doc().unwrap().tokens, ["stomaa", "pian"]);
        let fixed = PreprocessOptions::default().with_spell_correction(&raws, HashSet::new());
        assert_eq!(preprocess(&raws[6], &fixed).into_doc().unwrap().tokens, ["stoma", "pain"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const WORDS: &[&str] = &[
            "I've", "been", "worried", "about", "the", "pain", "daily", "nurses", "were", "wonderful",
            "can't", "walking", "activities", "stopped", "peripheral", "neuropathy", "bowel", "movement",
            "hospital", "staff", "treated", "me", "43", "yrs", "old", "age", "ours", "diagnosis",
            "tiredness", "emotionally", "hoped", "coping", "it's", "wife's", "carer", "agreed",
        ];

        proptest! {
            #[test]
            fn preprocessing_is_idempotent(idx in prop::collection::vec(0..WORDS.len(), 0..20), sep in "[ ,.!-]{1,2}") {
                let text = idx.iter().map(|&i| WORDS[i]).collect::<Vec<_>>().join(&sep);
                let o = PreprocessOptions::default();
                let first = o.tokens(&text);
                let second = o.tokens(&first.join(" "));
                let a: std::collections::BTreeSet<_> = first.iter().collect();
                let b: std::collections::BTreeSet<_> = second.iter().collect();
                prop_assert_eq!(a, b);
                if let Preprocessed::Doc(d) = preprocess(&RawComment::new("x", text), &o) {
                    prop_assert!(d.tokens.len() >= 2);
                }
            }
        }
    }
}
