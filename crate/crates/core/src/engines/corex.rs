//! Anchored correlation explanation over binary term presence.
//!
//! Each topic is a binary latent factor `Y_k`. Fitting is block coordinate
//! ascent on the lower bound
//!
//! ```text
//! G = sum_k sum_n [ E_q[ log r_k(y) + sum_i a_ki log(r_k(x_ni | y) / p(x_ni)) ] + H(q_nk) ]
//! ```
//!
//! over the posteriors `q`, the marginals `r`, and the word-topic weights
//! `a`. Non-anchor words carry weight 1 in the topic of highest mutual
//! information and 0 elsewhere; anchors are clamped to `anchor_strength` in
//! their theme's topic. Every block update maximises `G` given the others,
//! so the reported total correlation `G / N` never decreases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TopicWords;
use crate::corpus::{EncodedDoc, TermId, TfIdfMatrix};
use crate::error::{Error, Result};
use crate::labeling::ScoreVector;
use crate::scalar::{sigmoid, Real};
use crate::themes::ResolvedSeeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorexParams {
    pub k_extra: usize,
    pub anchor_strength: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Document-length strata for the conditional presence rates; 1 gives
    /// the unstratified model.
    pub length_bins: usize,
    pub rng_seed: u64,
}

impl Default for CorexParams {
    fn default() -> Self {
        CorexParams {
            k_extra: 2,
            anchor_strength: 4.0,
            max_iter: 200,
            tol: 1e-6,
            length_bins: 4,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorexModel<F> {
    /// Theme names of the anchored topics, which come first.
    pub theme_map: Vec<String>,
    pub n_topics: usize,
    pub n_terms: usize,
    /// Informative vocabulary terms (present in some but not all documents).
    pub features: Vec<TermId>,
    pub anchors: Vec<Vec<TermId>>,
    /// Upper bounds (inclusive) on distinct feature count for all strata but the last.
    pub length_edges: Vec<usize>,
    /// `P(Y_k = 1)`.
    pub prior: Vec<F>,
    /// `P(x_i = 1 | Y_k = 1, stratum)`, K x strata x features.
    pub p_on: Vec<Vec<Vec<F>>>,
    /// `P(x_i = 1 | Y_k = 0, stratum)`, K x strata x features.
    pub p_off: Vec<Vec<Vec<F>>>,
    /// Word-topic weights, K x features.
    pub alpha: Vec<Vec<F>>,
    /// Stratum-conditional mutual information, K x features.
    pub mi: Vec<Vec<F>>,
    pub tc_history: Vec<F>,
    pub params: CorexParams,
}

fn distinct_terms(doc: &EncodedDoc) -> Vec<TermId> {
    let mut t: Vec<TermId> = doc.term_ids().collect();
    t.sort_unstable();
    t.dedup();
    t
}

fn stratum(edges: &[usize], len: usize) -> usize {
    edges.iter().filter(|&&e| len > e).count()
}

fn length_edges(lengths: &[usize], bins: usize) -> Vec<usize> {
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut edges: Vec<usize> = (1..bins).map(|b| sorted[(n * b / bins).saturating_sub(1)]).collect();
    edges.dedup();
    if edges.last() == sorted.last() {
        edges.pop();
    }
    edges
}

pub fn fit_corex<F: Real>(matrix: &TfIdfMatrix<F>, anchors: &ResolvedSeeds, params: &CorexParams) -> Result<CorexModel<F>> {
    let presence = matrix.presence();
    fit_presence(&presence, matrix.n_terms, anchors, params)
}

fn fit_presence<F: Real>(
    presence: &[Vec<TermId>],
    n_terms: usize,
    anchors: &ResolvedSeeds,
    params: &CorexParams,
) -> Result<CorexModel<F>> {
    let n = presence.len();
    if n < 2 {
        return Err(Error::engine("corex needs at least two documents"));
    }
    if params.anchor_strength < 1.0 || !params.anchor_strength.is_finite() {
        return Err(Error::param("anchor_strength must be >= 1"));
    }
    if params.length_bins == 0 {
        return Err(Error::param("length_bins must be >= 1"));
    }
    let n_themes = anchors.len();
    let k = n_themes + params.k_extra;
    if k == 0 {
        return Err(Error::param("corex needs at least one topic"));
    }

    let mut df = vec![0usize; n_terms];
    for row in presence {
        for &t in row {
            df[t] += 1;
        }
    }
    let features: Vec<TermId> = (0..n_terms).filter(|&t| df[t] > 0 && df[t] < n).collect();
    if features.is_empty() {
        return Err(Error::engine("corex: no informative terms in the matrix"));
    }
    let mut index = vec![usize::MAX; n_terms];
    for (f, &t) in features.iter().enumerate() {
        index[t] = f;
    }
    let docs: Vec<Vec<usize>> = presence
        .iter()
        .map(|r| r.iter().map(|&t| index[t]).filter(|&f| f != usize::MAX).collect())
        .collect();
    let nf = features.len();
    let nn = F::from_count(n);

    let lengths: Vec<usize> = docs.iter().map(Vec::len).collect();
    let edges = length_edges(&lengths, params.length_bins);
    let nb = edges.len() + 1;
    let bin: Vec<usize> = lengths.iter().map(|&l| stratum(&edges, l)).collect();
    let mut bin_size = vec![0usize; nb];
    let mut bin_df = vec![vec![0usize; nf]; nb];
    for (doc, &b) in docs.iter().zip(&bin) {
        bin_size[b] += 1;
        for &f in doc {
            bin_df[b][f] += 1;
        }
    }
    let bin_n: Vec<F> = bin_size.iter().map(|&c| F::from_count(c)).collect();
    let marg: Vec<Vec<F>> = (0..nb)
        .map(|b| bin_df[b].iter().map(|&d| F::from_count(d) / bin_n[b]).collect())
        .collect();

    // anchor_of[f] = Some(topic) for clamped words
    let mut anchor_of: Vec<Option<usize>> = vec![None; nf];
    let mut anchor_terms = vec![Vec::new(); n_themes];
    for (j, th) in anchors.themes.iter().enumerate() {
        for &t in &th.terms {
            anchor_terms[j].push(t);
            if t < n_terms && index[t] != usize::MAX && anchor_of[index[t]].is_none() {
                anchor_of[index[t]] = Some(j);
            }
        }
    }
    let strength = F::lit(params.anchor_strength);
    let eps = F::epsilon().sqrt();
    let clamp = |x: F| x.max(eps).min(F::one() - eps);

    // anchored topics start near anchor presence, everything else at random
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut q: Vec<Vec<F>> = vec![vec![F::zero(); k]; n];
    for (doc, qn) in docs.iter().zip(q.iter_mut()) {
        for (j, qk) in qn.iter_mut().enumerate() {
            let u = F::lit(rng.gen::<f64>());
            let hit = j < n_themes && doc.iter().any(|&f| anchor_of[f] == Some(j));
            let base = if j >= n_themes {
                F::lit(0.25) + F::lit(0.5) * u
            } else if hit {
                F::lit(0.8) + F::lit(0.1) * u
            } else {
                F::lit(0.1) + F::lit(0.1) * u
            };
            *qk = clamp(base);
        }
    }

    let mut prior = vec![F::zero(); k];
    let mut p_on = vec![vec![vec![F::zero(); nf]; nb]; k];
    let mut p_off = vec![vec![vec![F::zero(); nf]; nb]; k];
    let mut alpha = vec![vec![F::zero(); nf]; k];
    let mut mi = vec![vec![F::zero(); nf]; k];
    let mut tc_history: Vec<F> = Vec::new();

    for _ in 0..params.max_iter.max(1) {
        // r-step
        let mut mass = vec![vec![F::zero(); nb]; k];
        let mut on_mass = vec![vec![vec![F::zero(); nf]; nb]; k];
        for ((doc, qn), &b) in docs.iter().zip(&q).zip(&bin) {
            for j in 0..k {
                mass[j][b] = mass[j][b] + qn[j];
                let row = &mut on_mass[j][b];
                for &f in doc {
                    row[f] = row[f] + qn[j];
                }
            }
        }
        for j in 0..k {
            prior[j] = mass[j].iter().copied().sum::<F>() / nn;
            for b in 0..nb {
                let off_mass = bin_n[b] - mass[j][b];
                for f in 0..nf {
                    let on = on_mass[j][b][f];
                    let tot = F::from_count(bin_df[b][f]);
                    p_on[j][b][f] = clamp_prob(on / mass[j][b]);
                    p_off[j][b][f] = clamp_prob((tot - on) / off_mass);
                }
            }
        }

        // alpha-step
        for j in 0..k {
            for f in 0..nf {
                let mut total = F::zero();
                for b in 0..nb {
                    let py = mass[j][b] / bin_n[b];
                    total = total + bin_n[b] * mutual_information(py, p_on[j][b][f], p_off[j][b][f], marg[b][f]);
                }
                mi[j][f] = total / nn;
            }
        }
        for f in 0..nf {
            let owner = match anchor_of[f] {
                Some(a) => a,
                None => (1..k).fold(0, |best, j| if mi[j][f] > mi[best][f] { j } else { best }),
            };
            let w = if anchor_of[f].is_some() { strength } else { F::one() };
            for (j, row) in alpha.iter_mut().enumerate() {
                row[f] = if j == owner { w } else { F::zero() };
            }
        }

        // q-step
        let ev = [
            evidence(&alpha, &p_off, Some(&marg)),
            evidence(&alpha, &p_on, Some(&marg)),
        ];
        let mut tc = F::zero();
        for ((doc, qn), &b) in docs.iter().zip(q.iter_mut()).zip(&bin) {
            for j in 0..k {
                let mut a = [F::zero(); 2];
                for y in 0..2 {
                    let py = if y == 1 { prior[j] } else { F::one() - prior[j] };
                    let delta = &ev[y].delta[j][b];
                    a[y] = py.ln() + ev[y].base[j][b] + doc.iter().map(|&f| delta[f]).sum::<F>();
                }
                let qj = clamp(sigmoid(a[1] - a[0]));
                qn[j] = qj;
                let h = -(qj * qj.ln() + (F::one() - qj) * (F::one() - qj).ln());
                tc = tc + qj * a[1] + (F::one() - qj) * a[0] + h;
            }
        }
        let tc = tc / nn;
        let done = tc_history
            .last()
            .map(|&prev: &F| (tc - prev).abs() < F::lit(params.tol))
            .unwrap_or(false);
        tc_history.push(tc);
        if done {
            break;
        }
    }

    // orient each topic so that Y = 1 means its words are present
    for j in 0..k {
        let lean: F = (0..nb)
            .flat_map(|b| (0..nf).map(move |f| (b, f)))
            .map(|(b, f)| alpha[j][f] * (p_on[j][b][f] - p_off[j][b][f]))
            .sum();
        if lean < F::zero() {
            prior[j] = F::one() - prior[j];
            std::mem::swap(&mut p_on[j], &mut p_off[j]);
        }
    }

    Ok(CorexModel {
        theme_map: anchors.themes.iter().map(|t| t.theme.clone()).collect(),
        n_topics: k,
        n_terms,
        features,
        anchors: anchor_terms,
        length_edges: edges,
        prior,
        p_on,
        p_off,
        alpha,
        mi,
        tc_history,
        params: params.clone(),
    })
}

fn clamp_prob<F: Real>(p: F) -> F {
    let tiny = F::min_positive_value();
    p.max(tiny).min(F::one() - F::epsilon())
}

/// `I(X; Y)` for binary X, Y with `P(Y=1) = py`, `P(X=1|Y=1) = on`,
/// `P(X=1|Y=0) = off` and marginal `P(X=1) = px`.
fn mutual_information<F: Real>(py: F, on: F, off: F, px: F) -> F {
    let one = F::one();
    if px <= F::zero() || px >= one {
        return F::zero();
    }
    let term = |joint: F, cond: F, marg: F| {
        if joint > F::zero() {
            joint * (cond / marg).ln()
        } else {
            F::zero()
        }
    };
    term(py * on, on, px)
        + term(py * (one - on), one - on, one - px)
        + term((one - py) * off, off, px)
        + term((one - py) * (one - off), one - off, one - px)
}

/// Per-topic, per-stratum log-likelihood decomposition:
/// `base + sum of delta over present features`.
struct Evidence<F> {
    base: Vec<Vec<F>>,
    delta: Vec<Vec<Vec<F>>>,
}

/// Log-likelihood terms for one value of `y`, taken relative to the stratum
/// marginals when given. Features constant within a stratum contribute
/// nothing there.
fn evidence<F: Real>(alpha: &[Vec<F>], p: &[Vec<Vec<F>>], marg: Option<&[Vec<F>]>) -> Evidence<F> {
    let k = alpha.len();
    let nb = p[0].len();
    let nf = alpha[0].len();
    let mut base = vec![vec![F::zero(); nb]; k];
    let mut delta = vec![vec![vec![F::zero(); nf]; nb]; k];
    for j in 0..k {
        for b in 0..nb {
            for f in 0..nf {
                let a = alpha[j][f];
                if a == F::zero() {
                    continue;
                }
                let (lm_on, lm_off) = match marg {
                    Some(m) => {
                        let m = m[b][f];
                        if m <= F::zero() || m >= F::one() {
                            continue;
                        }
                        (m.ln(), (F::one() - m).ln())
                    }
                    None => (F::zero(), F::zero()),
                };
                let off = a * ((F::one() - p[j][b][f]).ln() - lm_off);
                let on = a * (p[j][b][f].ln() - lm_on);
                base[j][b] = base[j][b] + off;
                delta[j][b][f] = on - off;
            }
        }
    }
    Evidence { base, delta }
}

/// Scores documents against a fitted model.
pub struct CorexScorer<'a, F> {
    model: &'a CorexModel<F>,
    index: Vec<usize>,
    logit_base: Vec<Vec<F>>,
    logit_delta: Vec<Vec<Vec<F>>>,
}

impl<F: Real> CorexModel<F> {
    pub fn scorer(&self) -> CorexScorer<'_, F> {
        let mut index = vec![usize::MAX; self.n_terms];
        for (f, &t) in self.features.iter().enumerate() {
            index[t] = f;
        }
        let on = evidence(&self.alpha, &self.p_on, None);
        let off = evidence(&self.alpha, &self.p_off, None);
        let k = self.n_topics;
        let nb = self.length_edges.len() + 1;
        let logit_base = (0..k)
            .map(|j| {
                let prior_odds = (self.prior[j] / (F::one() - self.prior[j])).ln();
                (0..nb).map(|b| prior_odds + on.base[j][b] - off.base[j][b]).collect()
            })
            .collect();
        let logit_delta = (0..k)
            .map(|j| {
                (0..nb)
                    .map(|b| on.delta[j][b].iter().zip(&off.delta[j][b]).map(|(&x, &y)| x - y).collect())
                    .collect()
            })
            .collect();
        CorexScorer {
            model: self,
            index,
            logit_base,
            logit_delta,
        }
    }

    pub fn n_themes(&self) -> usize {
        self.theme_map.len()
    }
}

impl<F: Real> CorexScorer<'_, F> {
    /// Posterior activation of every topic, background topics included.
    pub fn topic_posteriors(&self, doc: &EncodedDoc) -> Vec<F> {
        let fs: Vec<usize> = distinct_terms(doc)
            .into_iter()
            .filter(|&t| t < self.index.len())
            .map(|t| self.index[t])
            .filter(|&f| f != usize::MAX)
            .collect();
        let b = stratum(&self.model.length_edges, fs.len());
        (0..self.model.n_topics)
            .map(|j| {
                let delta = &self.logit_delta[j][b];
                sigmoid(self.logit_base[j][b] + fs.iter().map(|&f| delta[f]).sum::<F>())
            })
            .collect()
    }

    pub fn doc_scores(&self, doc: &EncodedDoc) -> ScoreVector<F> {
        let mut p = self.topic_posteriors(doc);
        p.truncate(self.model.n_themes());
        ScoreVector(p)
    }
}

pub fn corex_doc_scores<F: Real>(model: &CorexModel<F>, doc: &EncodedDoc) -> ScoreVector<F> {
    model.scorer().doc_scores(doc)
}

impl<F: Real> TopicWords<F> for CorexModel<F> {
    fn n_themes(&self) -> usize {
        self.theme_map.len()
    }

    /// Features ordered by `alpha * MI`, then by `MI`.
    fn ranked_terms(&self, theme: usize) -> Vec<(TermId, F)> {
        let weight: Vec<F> = (0..self.features.len())
            .map(|f| self.alpha[theme][f] * self.mi[theme][f])
            .collect();
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| {
            weight[b]
                .partial_cmp(&weight[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.mi[theme][b].partial_cmp(&self.mi[theme][a]).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.cmp(&b))
        });
        idx.into_iter().map(|f| (self.features[f], weight[f])).collect()
    }
}
