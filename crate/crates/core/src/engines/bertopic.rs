//! Guided-clustering topic model: spherical k-means over document
//! embeddings with the first centroids fixed to the theme representations,
//! single-label output, and class-based TF-IDF keywords.

use serde::{Deserialize, Serialize};

use super::kmeans::{plus_plus, spherical_kmeans};
use super::xclass::{class_reps, doc_vectors};
use super::TopicWords;
use crate::corpus::TermId;
use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::labeling::ScoreVector;
use crate::pipeline::PreparedCorpus;
use crate::scalar::Real;
use crate::themes::ResolvedSeeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertopicParams {
    pub k_extra: usize,
    pub kmeans_iters: usize,
    pub rng_seed: u64,
}

impl Default for BertopicParams {
    fn default() -> Self {
        BertopicParams {
            k_extra: 2,
            kmeans_iters: 50,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertopicModel<F> {
    pub theme_map: Vec<String>,
    pub centroids: Vec<Vec<F>>,
    /// Cluster of each retained document.
    pub assignment: Vec<usize>,
    /// Class-based TF-IDF terms per cluster, best first.
    pub keywords: Vec<Vec<(TermId, F)>>,
    pub warnings: Vec<String>,
    pub params: BertopicParams,
}

impl<F: Real> BertopicModel<F> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn doc_scores(&self, doc_index: usize) -> ScoreVector<F> {
        let mut s = ScoreVector::zeros(self.theme_map.len());
        let c = self.assignment[doc_index];
        if c < s.len() {
            s.0[c] = F::one();
        }
        s
    }
}

/// `tf(term, cluster) * ln(1 + K / clusters containing term)`, ranked per
/// cluster. Empty clusters yield empty lists.
pub fn ctfidf<F: Real>(counts: &[Vec<(TermId, u32)>], assignment: &[usize], k: usize) -> Vec<Vec<(TermId, F)>> {
    let mut tf: Vec<std::collections::BTreeMap<TermId, u64>> = vec![Default::default(); k];
    for (row, &c) in counts.iter().zip(assignment) {
        for &(t, n) in row {
            *tf[c].entry(t).or_insert(0) += n as u64;
        }
    }
    let mut cluster_df: std::collections::BTreeMap<TermId, usize> = Default::default();
    for m in &tf {
        for &t in m.keys() {
            *cluster_df.entry(t).or_insert(0) += 1;
        }
    }
    let kk = F::from_count(k);
    tf.iter()
        .map(|m| {
            let mut scored: Vec<(TermId, F)> = m
                .iter()
                .map(|(&t, &n)| {
                    let idf = (F::one() + kk / F::from_count(cluster_df[&t])).ln();
                    (t, F::from_count(n as usize) * idf)
                })
                .collect();
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
            scored
        })
        .collect()
}

pub fn guided_cluster<F: Real>(
    table: &EmbeddingTable<F>,
    corpus: &PreparedCorpus<F>,
    seeds: &ResolvedSeeds,
    params: &BertopicParams,
) -> Result<(BertopicModel<F>, Vec<ScoreVector<F>>)> {
    let points = doc_vectors(table, corpus)?;
    let reps = class_reps(table, seeds)?;
    let k = reps.len() + params.k_extra;
    let init = plus_plus(&points, reps, k, params.rng_seed);
    let clustering = spherical_kmeans(&points, init, params.kmeans_iters);
    let k = clustering.centroids.len();
    let keywords = ctfidf(&corpus.tfidf.counts, &clustering.assignment, k);
    let warnings = keywords
        .iter()
        .enumerate()
        .filter(|(_, kw)| kw.is_empty())
        .map(|(c, _)| format!("bertopic: cluster {c} is empty"))
        .collect();
    let model = BertopicModel {
        theme_map: seeds.themes.iter().map(|t| t.theme.clone()).collect(),
        centroids: clustering.centroids,
        assignment: clustering.assignment,
        keywords,
        warnings,
        params: params.clone(),
    };
    let scores = (0..points.len()).map(|i| model.doc_scores(i)).collect();
    Ok((model, scores))
}

impl<F: Real> TopicWords<F> for BertopicModel<F> {
    fn n_themes(&self) -> usize {
        self.theme_map.len()
    }

    fn ranked_terms(&self, theme: usize) -> Vec<(TermId, F)> {
        self.keywords[theme].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_candidate_ranks_first() {
        let counts = vec![vec![(3, 2)], vec![(1, 1), (2, 1)]];
        let kw: Vec<Vec<(TermId, f64)>> = ctfidf(&counts, &[0, 1], 2);
        assert_eq!(kw[0][0].0, 3);
    }

    #[test]
    fn shared_terms_score_below_exclusive_ones() {
        // term 0 in both clusters, term 1 only in cluster 0, equal tf
        let counts = vec![vec![(0, 2), (1, 2)], vec![(0, 1)]];
        let kw: Vec<Vec<(TermId, f64)>> = ctfidf(&counts, &[0, 1], 2);
        let score = |t| kw[0].iter().find(|x| x.0 == t).unwrap().1;
        assert!((score(0) - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((score(1) - 2.0 * 3f64.ln()).abs() < 1e-12);
        assert!(score(0) < score(1));
    }

    #[test]
    fn empty_cluster_has_no_keywords() {
        let kw: Vec<Vec<(TermId, f64)>> = ctfidf(&[vec![(0, 1)]], &[0], 3);
        assert!(kw[1].is_empty() && kw[2].is_empty());
    }

    #[test]
    fn extra_clusters_emit_no_label() {
        let m = BertopicModel::<f64> {
            theme_map: vec!["A".into()],
            centroids: vec![vec![1.0], vec![-1.0]],
            assignment: vec![0, 1],
            keywords: vec![vec![], vec![]],
            warnings: vec![],
            params: BertopicParams::default(),
        };
        assert_eq!(m.doc_scores(0).0, vec![1.0]);
        assert_eq!(m.doc_scores(1).0, vec![0.0]);
    }
}
