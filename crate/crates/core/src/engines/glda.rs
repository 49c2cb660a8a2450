//! Guided LDA: collapsed Gibbs sampling where seed terms get a boosted
//! Dirichlet pseudo-count in their theme's topic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TopicWords;
use crate::corpus::{EncodedDoc, TermId};
use crate::error::{Error, Result};
use crate::labeling::ScoreVector;
use crate::scalar::Real;
use crate::themes::ResolvedSeeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GldaParams {
    pub k_extra: usize,
    pub dirichlet_alpha: f64,
    pub beta: f64,
    pub boost: f64,
    pub iterations: usize,
    pub averaging_fraction: f64,
    pub rng_seed: u64,
}

impl Default for GldaParams {
    fn default() -> Self {
        GldaParams {
            k_extra: 2,
            dirichlet_alpha: 0.1,
            beta: 0.01,
            boost: 50.0,
            iterations: 500,
            averaging_fraction: 0.1,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GldaModel<F> {
    pub theme_map: Vec<String>,
    pub k: usize,
    /// Topic-word distributions, K x V.
    pub phi: Vec<Vec<F>>,
    /// Document-topic distributions, D x K.
    pub theta: Vec<Vec<F>>,
    pub params: GldaParams,
}

/// Plain LDA with `k` topics: the guided sampler with no seeds.
pub fn fit_lda<F: Real>(docs: &[EncodedDoc], n_terms: usize, k: usize, params: &GldaParams) -> Result<GldaModel<F>> {
    let p = GldaParams { k_extra: k, ..params.clone() };
    gibbs(docs, n_terms, &[], &[], &p)
}

pub fn fit_glda<F: Real>(docs: &[EncodedDoc], n_terms: usize, seeds: &ResolvedSeeds, params: &GldaParams) -> Result<GldaModel<F>> {
    let names: Vec<String> = seeds.themes.iter().map(|t| t.theme.clone()).collect();
    let groups: Vec<Vec<TermId>> = seeds.themes.iter().map(|t| t.terms.clone()).collect();
    gibbs(docs, n_terms, &names, &groups, params)
}

fn gibbs<F: Real>(
    docs: &[EncodedDoc],
    n_terms: usize,
    theme_map: &[String],
    seeds: &[Vec<TermId>],
    params: &GldaParams,
) -> Result<GldaModel<F>> {
    if params.iterations == 0 {
        return Err(Error::param("iterations must be >= 1"));
    }
    if !(params.boost >= 1.0) || !params.boost.is_finite() {
        return Err(Error::param("boost must be >= 1"));
    }
    if !(params.dirichlet_alpha > 0.0) || !(params.beta > 0.0) {
        return Err(Error::param("dirichlet_alpha and beta must be positive"));
    }
    if !(0.0..=1.0).contains(&params.averaging_fraction) {
        return Err(Error::param("averaging_fraction must lie in [0, 1]"));
    }
    let k = theme_map.len() + params.k_extra;
    if k == 0 {
        return Err(Error::param("glda needs at least one topic"));
    }
    let tokens: Vec<Vec<TermId>> = docs.iter().map(|d| d.term_ids().filter(|&t| t < n_terms).collect()).collect();
    if tokens.iter().all(Vec::is_empty) {
        return Err(Error::engine("glda: corpus has no in-vocabulary tokens"));
    }

    let alpha = F::lit(params.dirichlet_alpha);
    let beta = F::lit(params.beta);
    let boosted = beta * F::lit(params.boost);
    // word-major prior and counts, flattened as [w * k + t]
    let mut prior = vec![beta; n_terms * k];
    let mut seed_topic: Vec<Option<usize>> = vec![None; n_terms];
    for (t, group) in seeds.iter().enumerate() {
        for &w in group {
            if w < n_terms {
                prior[w * k + t] = boosted;
                seed_topic[w].get_or_insert(t);
            }
        }
    }
    let mut prior_sum = vec![F::zero(); k];
    for row in prior.chunks_exact(k) {
        for t in 0..k {
            prior_sum[t] = prior_sum[t] + row[t];
        }
    }

    // Seed tokens start in their theme's topic with probability 1 - 1/boost;
    // the same draws are made whatever the boost.
    let keep = 1.0 - 1.0 / params.boost;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut n_wt = vec![F::zero(); n_terms * k];
    let mut n_t = vec![F::zero(); k];
    let mut n_dt = vec![vec![F::zero(); k]; docs.len()];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, doc) in tokens.iter().enumerate() {
        let mut zs = Vec::with_capacity(doc.len());
        for &w in doc {
            let u: f64 = rng.gen();
            let r = rng.gen_range(0..k);
            let t = match seed_topic[w] {
                Some(s) if u < keep => s,
                _ => r,
            };
            n_wt[w * k + t] = n_wt[w * k + t] + F::one();
            n_t[t] = n_t[t] + F::one();
            n_dt[d][t] = n_dt[d][t] + F::one();
            zs.push(t);
        }
        z.push(zs);
    }

    let tail = ((params.iterations as f64 * params.averaging_fraction).ceil() as usize).clamp(1, params.iterations);
    let mut acc_wt = vec![F::zero(); n_terms * k];
    let mut acc_dt = vec![vec![F::zero(); k]; docs.len()];
    let mut cum = vec![F::zero(); k];
    let mut inv_den: Vec<F> = (0..k).map(|t| F::one() / (n_t[t] + prior_sum[t])).collect();

    for sweep in 0..params.iterations {
        for (d, doc) in tokens.iter().enumerate() {
            let ndt = &mut n_dt[d];
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                let nw = &mut n_wt[w * k..(w + 1) * k];
                nw[old] = nw[old] - F::one();
                n_t[old] = n_t[old] - F::one();
                ndt[old] = ndt[old] - F::one();
                inv_den[old] = F::one() / (n_t[old] + prior_sum[old]);
                let pw = &prior[w * k..(w + 1) * k];
                let mut total = F::zero();
                for t in 0..k {
                    total = total + (ndt[t] + alpha) * (nw[t] + pw[t]) * inv_den[t];
                    cum[t] = total;
                }
                let u = F::lit(rng.gen::<f64>()) * total;
                let new = cum.iter().position(|&c| u < c).unwrap_or(k - 1);
                z[d][i] = new;
                nw[new] = nw[new] + F::one();
                n_t[new] = n_t[new] + F::one();
                ndt[new] = ndt[new] + F::one();
                inv_den[new] = F::one() / (n_t[new] + prior_sum[new]);
            }
        }
        if sweep + tail >= params.iterations {
            for (a, &c) in acc_wt.iter_mut().zip(&n_wt) {
                *a = *a + c;
            }
            for (a, c) in acc_dt.iter_mut().zip(&n_dt) {
                for t in 0..k {
                    a[t] = a[t] + c[t];
                }
            }
        }
    }

    let samples = F::from_count(tail);
    let phi = (0..k)
        .map(|t| normalized((0..n_terms).map(|w| acc_wt[w * k + t] / samples + prior[w * k + t]).collect()))
        .collect();
    let theta = acc_dt
        .iter()
        .map(|a| normalized(a.iter().map(|&c| c / samples + alpha).collect()))
        .collect();
    Ok(GldaModel {
        theme_map: theme_map.to_vec(),
        k,
        phi,
        theta,
        params: params.clone(),
    })
}

fn normalized<F: Real>(mut row: Vec<F>) -> Vec<F> {
    let s: F = row.iter().copied().sum();
    for x in row.iter_mut() {
        *x = *x / s;
    }
    row
}

pub fn glda_doc_scores<F: Real>(model: &GldaModel<F>, doc_index: usize) -> Result<ScoreVector<F>> {
    let row = model
        .theta
        .get(doc_index)
        .ok_or_else(|| Error::param(format!("unknown document index {doc_index}")))?;
    Ok(ScoreVector(row[..model.theme_map.len()].to_vec()))
}

impl<F: Real> TopicWords<F> for GldaModel<F> {
    fn n_themes(&self) -> usize {
        self.theme_map.len()
    }

    fn ranked_terms(&self, theme: usize) -> Vec<(TermId, F)> {
        let row = &self.phi[theme];
        super::rank_desc(row).into_iter().map(|w| (w, row[w])).collect()
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
            unigrams_only: false,
        }
    }

    fn docs(n: usize, seed: u64) -> Vec<EncodedDoc> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let base = if i % 2 == 0 { 0 } else { 5 };
                EncodedDoc {
                    unigrams: (0..8).map(|_| base + rng.gen_range(0..5)).collect(),
                    bigrams: vec![],
                }
            })
            .collect()
    }

    fn small() -> GldaParams {
        GldaParams {
            iterations: 60,
            ..Default::default()
        }
    }

    #[test]
    fn rows_are_simplices() {
        let m: GldaModel<f64> = fit_glda(&docs(40, 1), 10, &seeds(&[&[0], &[5]]), &small()).unwrap();
        for row in m.phi.iter().chain(&m.theta) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn unit_boost_is_plain_lda() {
        let d = docs(30, 2);
        let p = GldaParams { boost: 1.0, ..small() };
        let guided: GldaModel<f64> = fit_glda(&d, 10, &seeds(&[&[0, 1], &[5]]), &p).unwrap();
        let plain: GldaModel<f64> = fit_lda(&d, 10, guided.k, &p).unwrap();
        assert_eq!(guided.phi, plain.phi);
        assert_eq!(guided.theta, plain.theta);
    }

    #[test]
    fn seeds_steer_topics() {
        let m: GldaModel<f64> = fit_glda(&docs(60, 3), 10, &seeds(&[&[0], &[5]]), &small()).unwrap();
        assert!(m.phi[0][0] > m.phi[1][0]);
        assert!(m.phi[1][5] > m.phi[0][5]);
        let even = glda_doc_scores(&m, 0).unwrap();
        assert!(even.0[0] > even.0[1]);
    }

    #[test]
    fn contract_errors() {
        let d = docs(4, 0);
        let zero = GldaParams { iterations: 0, ..small() };
        assert!(fit_glda::<f64>(&d, 10, &seeds(&[&[0]]), &zero).is_err());
        let weak = GldaParams { boost: 0.5, ..small() };
        assert!(fit_glda::<f64>(&d, 10, &seeds(&[&[0]]), &weak).is_err());
        assert!(fit_glda::<f64>(&[EncodedDoc::default()], 10, &seeds(&[&[0]]), &small()).is_err());
        let m: GldaModel<f64> = fit_glda(&d, 10, &seeds(&[&[0]]), &small()).unwrap();
        assert!(glda_doc_scores(&m, 99).is_err());
    }

    #[test]
    fn uniform_theta_gives_equal_scores() {
        let m = GldaModel::<f64> {
            theme_map: (0..6).map(|i| i.to_string()).collect(),
            k: 8,
            phi: vec![],
            theta: vec![vec![0.125; 8]],
            params: GldaParams::default(),
        };
        let s = glda_doc_scores(&m, 0).unwrap();
        assert_eq!(s.0, vec![0.125; 6]);
        assert!(crate::labeling::decide_labels(&s, &crate::labeling::DecisionPolicy::simplex(8)).is_empty());
    }

    #[test]
    fn same_seed_same_model() {
        let d = docs(20, 5);
        let a: GldaModel<f64> = fit_glda(&d, 10, &seeds(&[&[0]]), &small()).unwrap();
        let b: GldaModel<f64> = fit_glda(&d, 10, &seeds(&[&[0]]), &small()).unwrap();
        assert_eq!(a, b);
    }
}
