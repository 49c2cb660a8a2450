use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ProcessedDoc;
use crate::error::{Error, Result};

pub type TermId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Unigram,
    Bigram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub text: String,
    pub kind: TermKind,
    pub df: usize,
}

/// Unigram and bigram terms sharing one dense index space, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<Term>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, TermId>,
}

#[derive(Deserialize)]
struct VocabularyRepr {
    terms: Vec<Term>,
    n_docs: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_terms(r.terms, r.n_docs)
    }
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<Term>, n_docs: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.text.clone(), i))
            .collect();
        Vocabulary { terms, n_docs, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.terms[id]
    }

    pub fn text(&self, id: TermId) -> &str {
        &self.terms[id].text
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn df(&self, id: TermId) -> usize {
        self.terms[id].df
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vocabulary serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn encode(&self, doc: &ProcessedDoc) -> EncodedDoc {
        EncodedDoc {
            unigrams: doc.tokens.iter().filter_map(|t| self.id(t)).collect(),
            bigrams: doc.bigrams.iter().filter_map(|t| self.id(t)).collect(),
        }
    }
}

/// Keeps every term with document frequency at least `min_df`, plus any
/// term listed in `forced` that occurs at all.
pub fn build_vocabulary(docs: &[ProcessedDoc], min_df: usize, forced: &[String]) -> Result<Vocabulary> {
    if min_df == 0 {
        return Err(Error::param("min_df must be at least 1"));
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, (TermKind, usize)> = BTreeMap::new();
    for d in docs {
        let mut seen: HashSet<&str> = HashSet::new();
        let uni = d.tokens.iter().map(|t| (t, TermKind::Unigram));
        let bi = d.bigrams.iter().map(|t| (t, TermKind::Bigram));
        for (t, kind) in uni.chain(bi) {
            if seen.insert(t) {
                df.entry(t).or_insert((kind, 0)).1 += 1;
            }
        }
    }
    let forced: HashSet<&str> = forced.iter().map(String::as_str).collect();
    let terms = df
        .into_iter()
        .filter(|(t, (_, n))| *n >= min_df || forced.contains(t))
        .map(|(t, (kind, n))| Term {
            text: t.to_owned(),
            kind,
            df: n,
        })
        .collect();
    Ok(Vocabulary::from_terms(terms, docs.len()))
}

/// A document mapped into a vocabulary; out-of-vocabulary terms are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedDoc {
    pub unigrams: Vec<TermId>,
    pub bigrams: Vec<TermId>,
}

impl EncodedDoc {
    /// Unigram ids in text order followed by bigram ids in text order.
    pub fn term_ids(&self) -> impl Iterator<Item = TermId> + '_ {
        self.unigrams.iter().chain(&self.bigrams).copied()
    }

    pub fn len(&self) -> usize {
        self.unigrams.len() + self.bigrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted (term, count) pairs.
    pub fn counts(&self) -> Vec<(TermId, u32)> {
        let mut m: BTreeMap<TermId, u32> = BTreeMap::new();
        for t in self.term_ids() {
            *m.entry(t).or_insert(0) += 1;
        }
        m.into_iter().collect()
    }

    pub fn unigram_counts(&self) -> Vec<(TermId, u32)> {
        let mut m: BTreeMap<TermId, u32> = BTreeMap::new();
        for &t in &self.unigrams {
            *m.entry(t).or_insert(0) += 1;
        }
        m.into_iter().collect()
    }

    pub fn contains(&self, id: TermId) -> bool {
        self.term_ids().any(|t| t == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::bigrams;

    fn doc(id: &str, toks: &[&str]) -> ProcessedDoc {
        let tokens: Vec<String> = toks.iter().map(|s| s.to_string()).collect();
        ProcessedDoc {
            id: id.into(),
            bigrams: bigrams(&tokens),
            tokens,
            gold: None,
        }
    }

    #[test]
    fn min_df_filters_and_seeds_override() {
        let docs = vec![
            doc("a", &["pain", "bowel", "movement"]),
            doc("b", &["pain", "stoma"]),
        ];
        let v = build_vocabulary(&docs, 2, &[]).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.id("pain"), Some(0));
        assert_eq!(v.id("stoma"), None);

        let v = build_vocabulary(&docs, 5, &["bowel movement".into(), "copd".into()]).unwrap();
        assert!(v.id("bowel movement").is_some());
        assert_eq!(v.term(v.id("bowel movement").unwrap()).kind, TermKind::Bigram);
        assert_eq!(v.id("copd"), None);
    }

    #[test]
    fn indices_are_lexicographic_and_dense() {
        let docs = vec![doc("a", &["zeta", "alpha", "mid"]), doc("b", &["alpha", "zeta"])];
        let v = build_vocabulary(&docs, 1, &[]).unwrap();
        let texts: Vec<&str> = v.terms().iter().map(|t| t.text.as_str()).collect();
        let mut sorted = texts.clone();
        sorted.sort();
        assert_eq!(texts, sorted);
        assert!(v.terms().iter().all(|t| t.df <= v.n_docs()));
        assert_eq!(v.df(v.id("alpha").unwrap()), 2);
        let round = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(round.id("zeta"), v.id("zeta"));
    }

    #[test]
    fn empty_corpus_and_zero_min_df_are_errors() {
        assert!(matches!(build_vocabulary(&[], 1, &[]), Err(Error::EmptyCorpus)));
        assert!(build_vocabulary(&[doc("a", &["x", "y"])], 0, &[]).is_err());
    }
}
