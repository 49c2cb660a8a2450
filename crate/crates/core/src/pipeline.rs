//! Shared corpus preparation used by every engine: preprocessing, vocabulary,
//! TF-IDF, and seed resolution.

use std::collections::HashMap;

use crate::corpus::{
    build_vocabulary, preprocess, tfidf, EncodedDoc, Preprocessed, PreprocessOptions, ProcessedDoc,
    RawComment, TfIdfMatrix, Vocabulary,
};
use crate::error::{Error, Result};
use crate::labeling::ScoreVector;
use crate::scalar::Real;
use crate::themes::{hex_digest, resolve_seeds, seed_keys, ResolvedSeeds, ThemeConfig};

pub const DEFAULT_MIN_DF: usize = 2;

#[derive(Debug, Clone)]
pub struct PreparedCorpus<F> {
    /// Every input id, in input order, including removed comments.
    pub raw_ids: Vec<String>,
    pub raw_texts: Vec<String>,
    pub docs: Vec<ProcessedDoc>,
    pub removed: Vec<String>,
    pub vocab: Vocabulary,
    pub encoded: Vec<EncodedDoc>,
    pub tfidf: TfIdfMatrix<F>,
    pub themes: ThemeConfig,
    pub options: PreprocessOptions,
    pub corpus_sha256: String,
}

impl<F: Real> PreparedCorpus<F> {
    pub fn prepare(
        raws: &[RawComment],
        themes: &ThemeConfig,
        options: PreprocessOptions,
        min_df: usize,
    ) -> Result<Self> {
        if raws.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut docs = Vec::new();
        let mut removed = Vec::new();
        for r in raws {
            match preprocess(r, &options) {
                Preprocessed::Doc(d) => docs.push(d),
                Preprocessed::Removed { id } => removed.push(id),
            }
        }
        let forced = seed_keys(themes, &options);
        let vocab = build_vocabulary(&docs, min_df, &forced)?;
        let encoded: Vec<EncodedDoc> = docs.iter().map(|d| vocab.encode(d)).collect();
        let matrix = tfidf(&encoded, &vocab)?;
        let mut hasher_input = Vec::new();
        for r in raws {
            hasher_input.extend_from_slice(r.id.as_bytes());
            hasher_input.push(0);
            hasher_input.extend_from_slice(r.text.as_bytes());
            hasher_input.push(0);
        }
        Ok(PreparedCorpus {
            raw_ids: raws.iter().map(|r| r.id.clone()).collect(),
            raw_texts: raws.iter().map(|r| r.text.clone()).collect(),
            docs,
            removed,
            vocab,
            encoded,
            tfidf: matrix,
            themes: themes.clone(),
            options,
            corpus_sha256: hex_digest(&hasher_input),
        })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn seeds(&self, unigrams_only: bool) -> Result<ResolvedSeeds> {
        resolve_seeds(&self.themes, &self.vocab, &self.options, unigrams_only)
    }

    /// Expands scores for retained documents to every input id; removed
    /// comments score zero on every theme.
    pub fn complete_scores(&self, scores: Vec<ScoreVector<F>>) -> Vec<(String, ScoreVector<F>)> {
        let by_id: HashMap<&str, ScoreVector<F>> = self
            .docs
            .iter()
            .map(|d| d.id.as_str())
            .zip(scores)
            .collect();
        self.raw_ids
            .iter()
            .map(|id| {
                let s = by_id
                    .get(id.as_str())
                    .cloned()
                    .unwrap_or_else(|| ScoreVector::zeros(self.themes.len()));
                (id.clone(), s)
            })
            .collect()
    }
}
