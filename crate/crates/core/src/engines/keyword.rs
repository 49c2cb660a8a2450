//! Seed-presence baseline: a document scores 1 for a theme iff it contains
//! at least one of the theme's resolved seed terms.

use serde::{Deserialize, Serialize};

use super::TopicWords;
use crate::corpus::{EncodedDoc, TermId};
use crate::labeling::ScoreVector;
use crate::pipeline::PreparedCorpus;
use crate::scalar::Real;
use crate::themes::ResolvedSeeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordModel {
    pub seeds: Vec<Vec<TermId>>,
    /// Corpus document frequency of each seed, aligned with `seeds`.
    pub seed_df: Vec<Vec<usize>>,
}

pub fn keyword_scores<F: Real>(doc: &EncodedDoc, seeds: &ResolvedSeeds) -> ScoreVector<F> {
    ScoreVector(
        seeds
            .themes
            .iter()
            .map(|t| {
                if t.terms.iter().any(|&s| doc.contains(s)) {
                    F::one()
                } else {
                    F::zero()
                }
            })
            .collect(),
    )
}

pub fn fit_keyword<F: Real>(corpus: &PreparedCorpus<F>, seeds: &ResolvedSeeds) -> (KeywordModel, Vec<ScoreVector<F>>) {
    let scores = corpus.encoded.iter().map(|d| keyword_scores(d, seeds)).collect();
    let model = KeywordModel {
        seeds: seeds.themes.iter().map(|t| t.terms.clone()).collect(),
        seed_df: seeds
            .themes
            .iter()
            .map(|t| t.terms.iter().map(|&id| corpus.vocab.df(id)).collect())
            .collect(),
    };
    (model, scores)
}

impl<F: Real> TopicWords<F> for KeywordModel {
    fn n_themes(&self) -> usize {
        self.seeds.len()
    }

    fn ranked_terms(&self, theme: usize) -> Vec<(TermId, F)> {
        let df: Vec<F> = self.seed_df[theme].iter().map(|&d| F::from_count(d)).collect();
        super::rank_desc(&df)
            .into_iter()
            .map(|i| (self.seeds[theme][i], df[i]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PreprocessOptions, RawComment};
    use crate::themes::ThemeConfig;

    fn corpus(texts: &[&str]) -> PreparedCorpus<f64> {
        let raws: Vec<RawComment> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| RawComment::new(format!("c{i}"), *t))
            .collect();
        PreparedCorpus::prepare(&raws, &ThemeConfig::default_config(), PreprocessOptions::default(), 1).unwrap()
    }

    const TEXTS: &[&str] = &[
        "I feel very fortunate and am thankful to all the hospital staff who treated me.",
        "my wife is wonderful but I have difficulty walking to the shops",
        "nothing much else to say really",
        "chemotherapy left me with bowel movement problems and pain, worried about my family, anxiety and arthritis, I lift and drive",
    ];

    #[test]
    fn seed_presence_drives_scores() {
        let c = corpus(TEXTS);
        let seeds = c.seeds(false).unwrap();
        let s: Vec<ScoreVector<f64>> = c.encoded.iter().map(|d| keyword_scores(d, &seeds)).collect();
        assert_eq!(s[0].0, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // Social Function via "wife", Daily Life via "difficulty walk"
        assert_eq!(s[1].0, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert!(s[2].0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn adding_tokens_never_lowers_scores() {
        let c = corpus(TEXTS);
        let seeds = c.seeds(false).unwrap();
        let mut doc = c.encoded[0].clone();
        let before: ScoreVector<f64> = keyword_scores(&doc, &seeds);
        doc.unigrams.extend(c.encoded[3].unigrams.iter().copied());
        let after: ScoreVector<f64> = keyword_scores(&doc, &seeds);
        assert!(before.0.iter().zip(&after.0).all(|(b, a)| a >= b));
    }

    #[test]
    fn ranks_seeds_by_document_frequency() {
        let c = corpus(TEXTS);
        let seeds = c.seeds(false).unwrap();
        let (m, _) = fit_keyword(&c, &seeds);
        let top = TopicWords::<f64>::top_terms(&m, 0, 1);
        assert_eq!(top.len(), 1);
        assert!(seeds.is_seed_of(0, top[0].0));
    }
}
