//! WeSTClass analogue: PPMI word embeddings, seed-conditioned
//! pseudo-documents, a linear classifier pretrained on them, and
//! self-training on the real corpus.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{LinearParams, OvrLogistic};
use super::TopicWords;
use crate::corpus::{EncodedDoc, TermId, TfIdfMatrix};
use crate::error::{Error, Result};
use crate::labeling::ScoreVector;
use crate::pipeline::PreparedCorpus;
use crate::scalar::{cosine, Real};
use crate::synth::shifted_geometric;
use crate::themes::ResolvedSeeds;

pub const WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEmbeddings<F> {
    pub dim: usize,
    /// Embedded terms, ascending.
    pub terms: Vec<TermId>,
    pub vectors: Vec<Vec<F>>,
}

impl<F: Real> StaticEmbeddings<F> {
    pub fn vector(&self, term: TermId) -> Option<&[F]> {
        self.terms.binary_search(&term).ok().map(|i| self.vectors[i].as_slice())
    }
}

/// Rank-`d` factorisation of the positive PMI matrix of unigram
/// co-occurrences within a symmetric window of [`WINDOW`] tokens.
///
/// The vocabulary is the `max_vocab` most frequent unigrams plus every term
/// in `keep`. Vectors are `U sqrt(lambda)` over the `d` largest eigenvalues,
/// with non-positive eigenvalues contributing zero columns; each
/// eigenvector is signed so its largest-magnitude entry is positive.
pub fn train_static_embeddings<F: Real>(docs: &[EncodedDoc], d: usize, max_vocab: usize, keep: &[TermId]) -> Result<StaticEmbeddings<F>> {
    if d < 2 {
        return Err(Error::param("embedding dimension must be >= 2"));
    }
    let mut freq: BTreeMap<TermId, usize> = BTreeMap::new();
    for doc in docs {
        for &t in &doc.unigrams {
            *freq.entry(t).or_insert(0) += 1;
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut by_freq: Vec<(TermId, usize)> = freq.iter().map(|(&t, &c)| (t, c)).collect();
    by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut terms: Vec<TermId> = by_freq.iter().take(max_vocab).map(|&(t, _)| t).collect();
    terms.extend(keep.iter().copied().filter(|t| freq.contains_key(t)));
    terms.sort_unstable();
    terms.dedup();
    let m = terms.len();
    if d > m {
        return Err(Error::param(format!("embedding dimension {d} exceeds vocabulary size {m}")));
    }
    let pos = |t: TermId| terms.binary_search(&t).ok();

    let mut counts = DMatrix::<f64>::zeros(m, m);
    for doc in docs {
        let ids: Vec<Option<usize>> = doc.unigrams.iter().map(|&t| pos(t)).collect();
        for i in 0..ids.len() {
            let Some(a) = ids[i] else { continue };
            for b in ids.iter().skip(i + 1).take(WINDOW).flatten() {
                counts[(a, *b)] += 1.0;
                counts[(*b, a)] += 1.0;
            }
        }
    }
    let row: Vec<f64> = (0..m).map(|i| counts.row(i).sum()).collect();
    let total: f64 = row.iter().sum();
    let mut ppmi = DMatrix::<f64>::zeros(m, m);
    if total > 0.0 {
        for i in 0..m {
            for j in 0..m {
                let c = counts[(i, j)];
                if c > 0.0 {
                    ppmi[(i, j)] = (c * total / (row[i] * row[j])).ln().max(0.0);
                }
            }
        }
    }
    let eig = ppmi.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut vectors = vec![vec![F::zero(); d]; m];
    for (k, &c) in order.iter().take(d).enumerate() {
        let lambda = eig.eigenvalues[c];
        if lambda <= 0.0 {
            continue;
        }
        let col = eig.eigenvectors.column(c);
        let mut pivot = 0;
        for i in 1..m {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = lambda.sqrt() * sign;
        for (i, v) in vectors.iter_mut().enumerate() {
            v[k] = F::lit(col[i] * scale);
        }
    }
    Ok(StaticEmbeddings { dim: d, terms, vectors })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoDoc {
    pub theme: usize,
    pub tokens: Vec<TermId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoParams {
    pub per_class: usize,
    pub length_mean: f64,
    /// Probability of drawing a token from the background distribution.
    pub gamma: f64,
    pub top_m: usize,
    /// Softmax temperature over cosine; 0 selects the nearest word only.
    pub temperature: f64,
    pub rng_seed: u64,
}

impl Default for PseudoParams {
    fn default() -> Self {
        PseudoParams {
            per_class: 500,
            length_mean: 43.0,
            gamma: 0.2,
            top_m: 200,
            temperature: 0.1,
            rng_seed: 42,
        }
    }
}

/// Per-theme sampling distribution over the `top_m` words nearest the
/// mean seed vector.
fn class_distribution<F: Real>(emb: &StaticEmbeddings<F>, seeds: &[TermId], params: &PseudoParams) -> Option<(Vec<TermId>, Vec<f64>)> {
    let vs: Vec<&[F]> = seeds.iter().filter_map(|&s| emb.vector(s)).collect();
    if vs.is_empty() {
        return None;
    }
    let mut center = vec![F::zero(); emb.dim];
    for v in &vs {
        for (c, &x) in center.iter_mut().zip(v.iter()) {
            *c = *c + x;
        }
    }
    let sims: Vec<f64> = emb.vectors.iter().map(|v| cosine(v, &center).as_f64()).collect();
    let order = super::rank_desc(&sims);
    let top: Vec<usize> = order.into_iter().take(params.top_m.max(1)).collect();
    let words: Vec<TermId> = top.iter().map(|&i| emb.terms[i]).collect();
    let weights: Vec<f64> = if params.temperature <= 0.0 {
        let mut w = vec![0.0; top.len()];
        w[0] = 1.0;
        w
    } else {
        let max = sims[top[0]];
        top.iter().map(|&i| ((sims[i] - max) / params.temperature).exp()).collect()
    };
    Some((words, weights))
}

/// Draws `per_class` pseudo-documents per theme. `background` holds
/// corpus unigram frequencies.
pub fn generate_pseudo_docs<F: Real>(
    emb: &StaticEmbeddings<F>,
    seeds: &ResolvedSeeds,
    background: &[(TermId, f64)],
    params: &PseudoParams,
) -> Result<Vec<PseudoDoc>> {
    if !(0.0..=1.0).contains(&params.gamma) {
        return Err(Error::param("gamma must lie in [0, 1]"));
    }
    if params.length_mean < 2.0 {
        return Err(Error::param("length_mean must be >= 2"));
    }
    let bg_dist = WeightedIndex::new(background.iter().map(|&(_, w)| w))
        .map_err(|_| Error::engine("westclass: empty background distribution"))?;
    let mut dists = Vec::new();
    for th in &seeds.themes {
        let (words, weights) = class_distribution(emb, &th.terms, params)
            .ok_or_else(|| Error::engine(format!("westclass: theme {:?} has no unigram seed", th.theme)))?;
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::engine(format!("westclass: {e}")))?;
        dists.push((words, dist));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut out = Vec::with_capacity(dists.len() * params.per_class);
    for (theme, (words, dist)) in dists.iter().enumerate() {
        for _ in 0..params.per_class {
            let len = shifted_geometric(&mut rng, params.length_mean);
            let tokens = (0..len)
                .map(|_| {
                    if rng.gen::<f64>() < params.gamma {
                        background[bg_dist.sample(&mut rng)].0
                    } else {
                        words[dist.sample(&mut rng)]
                    }
                })
                .collect();
            out.push(PseudoDoc { theme, tokens });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainParams {
    pub conf_threshold: f64,
    pub delta: f64,
    pub max_rounds: usize,
    pub classifier: LinearParams,
}

impl Default for SelfTrainParams {
    fn default() -> Self {
        SelfTrainParams {
            conf_threshold: 0.6,
            delta: 0.001,
            max_rounds: 20,
            classifier: LinearParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainState<F> {
    pub classifier: OvrLogistic<F>,
    /// Completed self-training rounds.
    pub rounds: usize,
    /// Fraction of documents whose confident label set changed, one entry per round.
    pub changed_fraction: Vec<f64>,
    pub stop: StopReason,
}

/// Classes at or above `threshold`; empty when the document is not
/// confident in any class.
fn hard_labels<F: Real>(probs: &[Vec<F>], threshold: f64) -> Vec<Vec<usize>> {
    probs
        .iter()
        .map(|p| (0..p.len()).filter(|&c| p[c].as_f64() >= threshold).collect())
        .collect()
}

/// Pretrains on pseudo-documents, then alternates predicting the corpus and
/// retraining on pseudo-documents plus confidently labelled documents.
pub fn pretrain_and_self_train<F: Real>(
    pseudo_rows: &[Vec<(TermId, F)>],
    pseudo_labels: &[usize],
    corpus_rows: &[Vec<(TermId, F)>],
    n_classes: usize,
    n_features: usize,
    params: &SelfTrainParams,
) -> Result<(SelfTrainState<F>, Vec<ScoreVector<F>>)> {
    for c in 0..n_classes {
        if !pseudo_labels.contains(&c) {
            return Err(Error::engine(format!("westclass: no pseudo-documents for class {c}")));
        }
    }
    let mut clf = OvrLogistic::zeros(n_classes, n_features);
    let pseudo_targets: Vec<Vec<usize>> = pseudo_labels.iter().map(|&c| vec![c]).collect();
    clf.fit(pseudo_rows, &pseudo_targets, &params.classifier)?;
    let predict = |clf: &OvrLogistic<F>| -> Vec<Vec<F>> { corpus_rows.iter().map(|r| clf.predict(r)).collect() };
    let mut probs = predict(&clf);
    let mut labels = hard_labels(&probs, params.conf_threshold);
    if params.max_rounds > 0 && labels.iter().all(Vec::is_empty) {
        return Err(Error::engine("westclass: self-training starved (no document reached the confidence threshold)"));
    }
    let mut changed_fraction = Vec::new();
    let mut stop = StopReason::MaxRounds;
    for _ in 0..params.max_rounds {
        let mut rows: Vec<&[(TermId, F)]> = pseudo_rows.iter().map(Vec::as_slice).collect();
        let mut targets = pseudo_targets.clone();
        for (row, l) in corpus_rows.iter().zip(&labels) {
            if !l.is_empty() {
                rows.push(row);
                targets.push(l.clone());
            }
        }
        clf.fit(&rows, &targets, &params.classifier)?;
        probs = predict(&clf);
        let next = hard_labels(&probs, params.conf_threshold);
        let changed = next.iter().zip(&labels).filter(|(a, b)| a != b).count();
        let frac = if next.is_empty() { 0.0 } else { changed as f64 / next.len() as f64 };
        changed_fraction.push(frac);
        labels = next;
        if frac < params.delta {
            stop = StopReason::Converged;
            break;
        }
    }
    let state = SelfTrainState {
        classifier: clf,
        rounds: changed_fraction.len(),
        changed_fraction,
        stop,
    };
    Ok((state, probs.into_iter().map(ScoreVector).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WestclassParams {
    pub dim: usize,
    pub max_embedding_vocab: usize,
    pub pseudo: PseudoParams,
    pub self_train: SelfTrainParams,
}

impl Default for WestclassParams {
    fn default() -> Self {
        WestclassParams {
            dim: 50,
            max_embedding_vocab: 2000,
            pseudo: PseudoParams::default(),
            self_train: SelfTrainParams::default(),
        }
    }
}

impl WestclassParams {
    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.pseudo.rng_seed = rng_seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WestclassModel<F> {
    pub theme_map: Vec<String>,
    pub embeddings: StaticEmbeddings<F>,
    pub state: SelfTrainState<F>,
    pub params: WestclassParams,
}

/// Unigram-only TF-IDF rows under the corpus idf.
pub fn unigram_rows<F: Real>(docs: &[Vec<(TermId, u32)>], idf: &[F]) -> Vec<Vec<(TermId, F)>> {
    TfIdfMatrix::from_counts(docs.to_vec(), idf.to_vec()).rows
}

pub fn fit_westclass<F: Real>(
    corpus: &PreparedCorpus<F>,
    seeds: &ResolvedSeeds,
    params: &WestclassParams,
) -> Result<(WestclassModel<F>, Vec<ScoreVector<F>>)> {
    let keep: Vec<TermId> = seeds.themes.iter().flat_map(|t| t.terms.iter().copied()).collect();
    let emb = train_static_embeddings::<F>(&corpus.encoded, params.dim, params.max_embedding_vocab, &keep)?;
    let mut freq: BTreeMap<TermId, f64> = BTreeMap::new();
    for d in &corpus.encoded {
        for &t in &d.unigrams {
            *freq.entry(t).or_insert(0.0) += 1.0;
        }
    }
    let background: Vec<(TermId, f64)> = freq.into_iter().collect();
    let pseudo = generate_pseudo_docs(&emb, seeds, &background, &params.pseudo)?;
    let idf = &corpus.tfidf.idf;
    let pseudo_counts: Vec<Vec<(TermId, u32)>> = pseudo
        .iter()
        .map(|p| EncodedDoc { unigrams: p.tokens.clone(), bigrams: vec![] }.unigram_counts())
        .collect();
    let pseudo_rows = unigram_rows(&pseudo_counts, idf);
    let corpus_counts: Vec<Vec<(TermId, u32)>> = corpus.encoded.iter().map(EncodedDoc::unigram_counts).collect();
    let corpus_rows = unigram_rows(&corpus_counts, idf);
    let labels: Vec<usize> = pseudo.iter().map(|p| p.theme).collect();
    let (state, scores) = pretrain_and_self_train(&pseudo_rows, &labels, &corpus_rows, seeds.len(), corpus.vocab.len(), &params.self_train)?;
    let model = WestclassModel {
        theme_map: seeds.themes.iter().map(|t| t.theme.clone()).collect(),
        embeddings: emb,
        state,
        params: params.clone(),
    };
    Ok((model, scores))
}

impl<F: Real> WestclassModel<F> {
    pub fn doc_scores(&self, doc: &EncodedDoc, idf: &[F]) -> ScoreVector<F> {
        let row = &unigram_rows(&[doc.unigram_counts()], idf)[0];
        ScoreVector(self.state.classifier.predict(row))
    }
}

impl<F: Real> TopicWords<F> for WestclassModel<F> {
    fn n_themes(&self) -> usize {
        self.theme_map.len()
    }

    /// Terms by classifier weight.
    fn ranked_terms(&self, theme: usize) -> Vec<(TermId, F)> {
        let w = &self.state.classifier.weights[theme];
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
    use crate::themes::ThemeSeeds;

    fn seeds(groups: &[&[TermId]]) -> ResolvedSeeds {
        ResolvedSeeds {
            themes: groups
                .iter()
                .enumerate()
                .map(|(i, g)| ThemeSeeds {
                    theme: format!("T{i}"),
                    terms: g.to_vec(),
                    resolved_raw: vec![],
                    dropped: vec![],
                })
                .collect(),
            unigrams_only: true,
        }
    }

    fn doc(u: &[TermId]) -> EncodedDoc {
        EncodedDoc { unigrams: u.to_vec(), bigrams: vec![] }
    }

    /// Words 0 and 1 only ever appear side by side; 2..8 mix freely.
    fn paired_corpus() -> Vec<EncodedDoc> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut docs = Vec::new();
        for i in 0..60 {
            let mut u: Vec<TermId> = (0..12).map(|_| rng.gen_range(2..8)).collect();
            if i % 3 == 0 {
                u.push(0);
                u.push(1);
                u.extend((0..12).map(|_| rng.gen_range(2..8)));
            }
            docs.push(doc(&u));
        }
        docs
    }

    #[test]
    fn exclusive_pair_embeds_close_together() {
        let emb: StaticEmbeddings<f64> = train_static_embeddings(&paired_corpus(), 4, 100, &[]).unwrap();
        let a = emb.vector(0).unwrap();
        let b = emb.vector(1).unwrap();
        assert!(cosine(a, b) > 0.9, "{}", cosine(a, b));
        assert!(emb.vector(99).is_none());
    }

    #[test]
    fn embeddings_are_deterministic_and_signed() {
        let a: StaticEmbeddings<f64> = train_static_embeddings(&paired_corpus(), 3, 100, &[]).unwrap();
        let b: StaticEmbeddings<f64> = train_static_embeddings(&paired_corpus(), 3, 100, &[]).unwrap();
        assert_eq!(a, b);
        for k in 0..3 {
            let col: Vec<f64> = a.vectors.iter().map(|v| v[k]).collect();
            let pivot = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(pivot >= 0.0);
        }
        assert!(train_static_embeddings::<f64>(&paired_corpus(), 50, 100, &[]).is_err());
        assert!(train_static_embeddings::<f64>(&paired_corpus(), 1, 100, &[]).is_err());
    }

    fn toy_embeddings() -> StaticEmbeddings<f64> {
        StaticEmbeddings {
            dim: 2,
            terms: vec![0, 1, 2, 3, 4],
            vectors: vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9], vec![0.7, 0.7]],
        }
    }

    #[test]
    fn pure_seed_limit() {
        let p = PseudoParams { gamma: 0.0, top_m: 1, temperature: 0.0, per_class: 20, ..Default::default() };
        let docs = generate_pseudo_docs(&toy_embeddings(), &seeds(&[&[0], &[2]]), &[(4, 1.0)], &p).unwrap();
        for d in &docs {
            assert!(d.tokens.len() >= 2);
            let want = if d.theme == 0 { 0 } else { 2 };
            assert!(d.tokens.iter().all(|&t| t == want));
        }
    }

    #[test]
    fn pure_background_when_gamma_is_one() {
        let p = PseudoParams { gamma: 1.0, per_class: 10, ..Default::default() };
        let docs = generate_pseudo_docs(&toy_embeddings(), &seeds(&[&[0], &[2]]), &[(4, 1.0)], &p).unwrap();
        assert!(docs.iter().all(|d| d.tokens.iter().all(|&t| t == 4)));
    }

    #[test]
    fn seedless_theme_is_an_error() {
        let r = generate_pseudo_docs(&toy_embeddings(), &seeds(&[&[0], &[]]), &[(4, 1.0)], &PseudoParams::default());
        assert!(r.unwrap_err().is_engine_failure());
    }

    fn separable() -> (Vec<Vec<(TermId, f64)>>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let c = i % 2;
            rows.push(vec![(c, 0.9), (2, 0.3)]);
            labels.push(c);
        }
        (rows, labels)
    }

    #[test]
    fn identical_corpus_converges_in_one_round() {
        let (rows, labels) = separable();
        let (st, scores) = pretrain_and_self_train(&rows, &labels, &rows, 2, 3, &SelfTrainParams::default()).unwrap();
        assert_eq!(st.rounds, 1);
        assert_eq!(st.changed_fraction, vec![0.0]);
        assert_eq!(st.stop, StopReason::Converged);
        assert!(scores.iter().all(|s| s.is_valid()));
    }

    #[test]
    fn zero_rounds_returns_pretrained_predictions() {
        let (rows, labels) = separable();
        let p = SelfTrainParams { max_rounds: 0, ..Default::default() };
        let (st, scores) = pretrain_and_self_train(&rows, &labels, &rows, 2, 3, &p).unwrap();
        assert_eq!(st.rounds, 0);
        assert_eq!(st.stop, StopReason::MaxRounds);
        let mut clf = OvrLogistic::zeros(2, 3);
        let targets: Vec<Vec<usize>> = labels.iter().map(|&c| vec![c]).collect();
        clf.fit(&rows, &targets, &p.classifier).unwrap();
        assert_eq!(scores[0].0, clf.predict(&rows[0]));
    }

    #[test]
    fn unreachable_threshold_starves() {
        let (rows, labels) = separable();
        let p = SelfTrainParams { conf_threshold: 1.1, ..Default::default() };
        let err = pretrain_and_self_train(&rows, &labels, &rows, 2, 3, &p).unwrap_err();
        assert!(err.to_string().contains("starved"));
    }
}
