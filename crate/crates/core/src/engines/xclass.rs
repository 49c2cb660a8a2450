//! X-Class analogue over precomputed contextual embeddings.
//!
//! Class representations are mean seed-term vectors. Documents are clustered
//! by spherical k-means started at those representations, the most
//! confident cluster-consistent documents of each class become pseudo-labels,
//! and a linear classifier over TF-IDF produces the final probabilities.

use serde::{Deserialize, Serialize};

use super::kmeans::{nearest, spherical_kmeans, unit};
use super::linear::{LinearParams, OvrLogistic};
use super::TopicWords;
use crate::corpus::TermId;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::labeling::ScoreVector;
use crate::pipeline::PreparedCorpus;
use crate::scalar::{dot, Real};
use crate::themes::ResolvedSeeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XclassParams {
    pub select_fraction: f64,
    pub kmeans_iters: usize,
    pub classifier: LinearParams,
    pub rng_seed: u64,
}

impl Default for XclassParams {
    fn default() -> Self {
        XclassParams {
            select_fraction: 0.5,
            kmeans_iters: 50,
            classifier: LinearParams::default(),
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XclassModel<F> {
    pub theme_map: Vec<String>,
    /// Unit-length class representations.
    pub class_reps: Vec<Vec<F>>,
    pub centroids: Vec<Vec<F>>,
    /// Pseudo-labelled document indices per class.
    pub pseudo_labels: Vec<Vec<usize>>,
    pub classifier: OvrLogistic<F>,
    pub params: XclassParams,
}

/// Unit-length mean of each theme's resolved seed vectors.
pub fn class_reps<F: Real>(table: &EmbeddingTable<F>, seeds: &ResolvedSeeds) -> Result<Vec<Vec<F>>> {
    seeds
        .themes
        .iter()
        .map(|th| {
            if th.resolved_raw.is_empty() {
                return Err(Error::UnanchoredTheme {
                    theme: th.theme.clone(),
                    dropped: th.dropped.iter().map(|d| d.seed.clone()).collect(),
                });
            }
            let mut mean = vec![F::zero(); table.dim];
            for s in &th.resolved_raw {
                let v = table.seed(s)?;
                if v.len() != table.dim {
                    return Err(Error::EmbeddingFormat(format!("seed {s:?} has dimension {}", v.len())));
                }
                for (m, &x) in mean.iter_mut().zip(v) {
                    *m = *m + x;
                }
            }
            Ok(unit(&mean))
        })
        .collect()
}

/// Unit-length vectors for the retained documents of `corpus`, after
/// checking that every input id is present.
pub fn doc_vectors<F: Real>(table: &EmbeddingTable<F>, corpus: &PreparedCorpus<F>) -> Result<Vec<Vec<F>>> {
    if table.docs.is_empty() {
        return Err(Error::EmbeddingFormat("embedding table has no document vectors".into()));
    }
    table.require_docs(&corpus.raw_ids)?;
    corpus.docs.iter().map(|d| Ok(unit(table.doc(&d.id)?))).collect()
}

/// Best class and its cosine margin over the runner-up.
fn confidence<F: Real>(reps: &[Vec<F>], x: &[F]) -> (usize, F) {
    let sims: Vec<F> = reps.iter().map(|r| dot(r, x)).collect();
    let best = nearest(reps, x);
    let second = sims
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != best)
        .map(|(_, &s)| s)
        .fold(F::neg_infinity(), F::max);
    let margin = if second == F::neg_infinity() { sims[best] } else { sims[best] - second };
    (best, margin)
}

pub fn xclass_fit<F: Real>(
    table: &EmbeddingTable<F>,
    corpus: &PreparedCorpus<F>,
    seeds: &ResolvedSeeds,
    params: &XclassParams,
) -> Result<(XclassModel<F>, Vec<ScoreVector<F>>)> {
    if !(0.0..=1.0).contains(&params.select_fraction) {
        return Err(Error::param("select_fraction must lie in [0, 1]"));
    }
    let reps = class_reps(table, seeds)?;
    let points = doc_vectors(table, corpus)?;
    let clustering = spherical_kmeans(&points, reps.clone(), params.kmeans_iters);

    let mut candidates: Vec<Vec<(usize, F)>> = vec![Vec::new(); reps.len()];
    for (i, p) in points.iter().enumerate() {
        let (class, margin) = confidence(&reps, p);
        if clustering.assignment[i] == class {
            candidates[class].push((i, margin));
        }
    }
    let mut pseudo_labels = Vec::with_capacity(reps.len());
    for (c, mut cand) in candidates.into_iter().enumerate() {
        cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        let take = (params.select_fraction * cand.len() as f64).ceil() as usize;
        if take == 0 {
            return Err(Error::engine(format!(
                "xclass: theme {:?} received no pseudo-labels",
                seeds.themes[c].theme
            )));
        }
        let mut chosen: Vec<usize> = cand.into_iter().take(take).map(|(i, _)| i).collect();
        chosen.sort_unstable();
        pseudo_labels.push(chosen);
    }

    let mut rows: Vec<&[(TermId, F)]> = Vec::new();
    let mut targets: Vec<Vec<usize>> = Vec::new();
    for (c, docs) in pseudo_labels.iter().enumerate() {
        for &i in docs {
            rows.push(&corpus.tfidf.rows[i]);
            targets.push(vec![c]);
        }
    }
    let mut classifier = OvrLogistic::zeros(reps.len(), corpus.vocab.len());
    classifier.fit(&rows, &targets, &params.classifier)?;
    let scores = corpus
        .tfidf
        .rows
        .iter()
        .map(|r| ScoreVector(classifier.predict(r)))
        .collect();
    let model = XclassModel {
        theme_map: seeds.themes.iter().map(|t| t.theme.clone()).collect(),
        class_reps: reps,
        centroids: clustering.centroids,
        pseudo_labels,
        classifier,
        params: params.clone(),
    };
    Ok((model, scores))
}

impl<F: Real> TopicWords<F> for XclassModel<F> {
    fn n_themes(&self) -> usize {
        self.theme_map.len()
    }

    /// Terms by classifier weight.
    fn ranked_terms(&self, theme: usize) -> Vec<(TermId, F)> {
        let w = &self.classifier.weights[theme];
        super::rank_desc(w)
            .into_iter()
            .filter(|&t| w[t] > F::zero())
            .map(|t| (t, w[t]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_is_best_minus_second() {
        let reps = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let x = unit(&[0.8f64, 0.6]);
        let (c, m) = confidence(&reps, &x);
        assert_eq!(c, 0);
        assert!((m - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_class_margin_is_similarity() {
        let (c, m) = confidence(&[vec![1.0f64, 0.0]], &[0.6, 0.8]);
        assert_eq!(c, 0);
        assert!((m - 0.6).abs() < 1e-12);
    }
}
