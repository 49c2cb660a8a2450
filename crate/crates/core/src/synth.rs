//! Planted-theme synthetic corpora with known gold labels.
//!
//! Each theme owns a disjoint planted vocabulary made of its (collision-free)
//! seed terms plus generated pseudo-words. A shared background vocabulary
//! supplies the `overlap_noise` fraction of every document's words.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{preprocess_seed_term, PreprocessOptions, RawComment};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::scalar::{normalize_in_place, Real};
use crate::themes::ThemeConfig;

/// Theme prevalences in the default sample and its no-theme rate.
pub const DEFAULT_MARGINALS: [f64; 6] = [0.43, 0.27, 0.23, 0.16, 0.11, 0.09];
pub const DEFAULT_NO_THEME: f64 = 0.14;
pub const DEFAULT_LENGTH_MEAN: f64 = 43.0;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub themes: ThemeConfig,
    /// Planted items per theme, seeds included.
    pub planted_vocab_size: usize,
    /// Total sampling mass of seed items within a theme.
    pub seed_mass: f64,
    pub background_vocab_size: usize,
    pub n_docs: usize,
    pub theme_marginals: Vec<f64>,
    pub no_theme_prob: f64,
    pub length_mean: f64,
    pub overlap_noise: f64,
    /// At most one theme per document (marginals then act as relative weights).
    pub single_theme: bool,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            themes: ThemeConfig::default_config(),
            planted_vocab_size: 60,
            seed_mass: 0.4,
            background_vocab_size: 300,
            n_docs: 2000,
            theme_marginals: DEFAULT_MARGINALS.to_vec(),
            no_theme_prob: DEFAULT_NO_THEME,
            length_mean: DEFAULT_LENGTH_MEAN,
            overlap_noise: 0.1,
            single_theme: false,
            rng_seed: 42,
        }
    }
}

/// Ground truth of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub themes: Vec<String>,
    /// Planted item (word or two-word seed) -> owning theme index.
    pub word_theme: BTreeMap<String, usize>,
    pub background: Vec<String>,
    /// Seeds planted per theme (raw strings).
    pub planted_seeds: Vec<Vec<String>>,
}

impl PlantedTruth {
    pub fn theme_of(&self, item: &str) -> Option<usize> {
        self.word_theme.get(item).copied()
    }

    /// Preprocessed unigram/bigram keys belonging to each theme.
    pub fn processed_terms(&self, options: &PreprocessOptions) -> Vec<BTreeSet<String>> {
        let mut out = vec![BTreeSet::new(); self.themes.len()];
        for (item, &t) in &self.word_theme {
            if let Ok(k) = preprocess_seed_term(item, options) {
                out[t].insert(k.key());
                out[t].extend(k.tokens.iter().cloned());
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub comments: Vec<RawComment>,
    pub truth: PlantedTruth,
}

const ONSETS: &[u8] = b"bdfgklmnprstvz";
const NUCLEI: &[u8] = b"aeiou";
const CODAS: &[u8] = b"aou";

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let mut w = String::with_capacity(6);
    for i in 0..3 {
        w.push(ONSETS[rng.gen_range(0..ONSETS.len())] as char);
        let pool = if i == 2 { CODAS } else { NUCLEI };
        w.push(pool[rng.gen_range(0..pool.len())] as char);
    }
    w
}

/// Seeds whose processed unigrams and keys are not shared with any other theme.
fn plantable_seeds(themes: &ThemeConfig, options: &PreprocessOptions) -> Vec<Vec<String>> {
    let keyed: Vec<Vec<(String, BTreeSet<String>)>> = themes
        .themes
        .iter()
        .map(|t| {
            t.seeds
                .iter()
                .filter_map(|s| {
                    let k = preprocess_seed_term(s, options).ok()?;
                    let mut parts: BTreeSet<String> = k.tokens.iter().cloned().collect();
                    parts.insert(k.key());
                    Some((s.clone(), parts))
                })
                .collect()
        })
        .collect();
    keyed
        .iter()
        .enumerate()
        .map(|(t, seeds)| {
            seeds
                .iter()
                .filter(|(_, parts)| {
                    keyed.iter().enumerate().filter(|(o, _)| *o != t).all(|(_, other)| {
                        other.iter().all(|(_, op)| op.is_disjoint(parts))
                    })
                })
                .map(|(s, _)| s.clone())
                .collect()
        })
        .collect()
}

fn zipf_weights(n: usize, mass: f64) -> Vec<f64> {
    let h: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
    (1..=n).map(|r| mass / (r as f64 * h)).collect()
}

fn sample_index(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().unwrap();
    let u = rng.gen::<f64>() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

fn cumsum(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// `2 + Geometric` with the given mean (mean >= 2).
pub fn shifted_geometric(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let extra = mean - 2.0;
    if extra <= 0.0 {
        return 2;
    }
    let p = 1.0 / (extra + 1.0);
    let u: f64 = 1.0 - rng.gen::<f64>();
    2 + (u.ln() / (1.0 - p).ln()).floor() as usize
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    let k = cfg.themes.len();
    if cfg.theme_marginals.len() != k {
        return Err(Error::param(format!(
            "{} marginals for {k} themes",
            cfg.theme_marginals.len()
        )));
    }
    if cfg.theme_marginals.iter().any(|p| !(0.0..=1.0).contains(p)) || !(0.0..=1.0).contains(&cfg.no_theme_prob) {
        return Err(Error::param("probabilities must lie in [0, 1]"));
    }
    if cfg.theme_marginals.iter().all(|&p| p == 0.0) && cfg.no_theme_prob < 1.0 {
        return Err(Error::param("all theme marginals are zero but no_theme_prob < 1"));
    }
    if cfg.length_mean < 2.0 {
        return Err(Error::param("length_mean must be at least 2"));
    }
    if !(0.0..=1.0).contains(&cfg.overlap_noise) {
        return Err(Error::param("overlap_noise must lie in [0, 1]"));
    }
    let options = PreprocessOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    // Planted vocabularies.
    let seeds = plantable_seeds(&cfg.themes, &options);
    let mut reserved: HashSet<String> = cfg
        .themes
        .themes
        .iter()
        .flat_map(|t| t.seeds.iter())
        .flat_map(|s| options.tokens(s))
        .collect();
    let mut fresh = |rng: &mut ChaCha8Rng| loop {
        let w = pseudo_word(rng);
        let toks = options.tokens(&w);
        if toks.len() == 1 && toks[0] == w && reserved.insert(w.clone()) {
            return w;
        }
    };
    let mut word_theme = BTreeMap::new();
    let mut theme_items: Vec<Vec<String>> = Vec::with_capacity(k);
    let mut theme_cum: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (t, planted) in seeds.iter().enumerate() {
        let n_seed = planted.len().min(cfg.planted_vocab_size);
        let n_fill = cfg.planted_vocab_size.saturating_sub(n_seed).max(1);
        let mut items: Vec<String> = planted[..n_seed].to_vec();
        let mut weights: Vec<f64> = if n_seed > 0 {
            vec![cfg.seed_mass / n_seed as f64; n_seed]
        } else {
            vec![]
        };
        let fill_mass = if n_seed > 0 { 1.0 - cfg.seed_mass } else { 1.0 };
        items.extend((0..n_fill).map(|_| fresh(&mut rng)));
        weights.extend(zipf_weights(n_fill, fill_mass));
        for it in &items {
            word_theme.insert(it.clone(), t);
        }
        theme_cum.push(cumsum(&weights));
        theme_items.push(items);
    }
    let background: Vec<String> = (0..cfg.background_vocab_size.max(1)).map(|_| fresh(&mut rng)).collect();
    let bg_cum = cumsum(&zipf_weights(background.len(), 1.0));

    let names = cfg.themes.names();
    let mut comments = Vec::with_capacity(cfg.n_docs);
    let theme_cum_marg = cumsum(&cfg.theme_marginals);
    for d in 0..cfg.n_docs {
        let mut doc_themes: Vec<usize> = Vec::new();
        if rng.gen::<f64>() >= cfg.no_theme_prob {
            if cfg.single_theme {
                doc_themes.push(sample_index(&mut rng, &theme_cum_marg));
            } else {
                while doc_themes.is_empty() {
                    doc_themes = (0..k).filter(|&t| rng.gen::<f64>() < cfg.theme_marginals[t]).collect();
                }
            }
        }
        let len = shifted_geometric(&mut rng, cfg.length_mean);
        let mut words: Vec<&str> = Vec::with_capacity(len + 1);
        while words.len() < len {
            let item: &str = if doc_themes.is_empty() || rng.gen::<f64>() < cfg.overlap_noise {
                &background[sample_index(&mut rng, &bg_cum)]
            } else {
                let t = doc_themes[rng.gen_range(0..doc_themes.len())];
                &theme_items[t][sample_index(&mut rng, &theme_cum[t])]
            };
            words.extend(item.split(' '));
        }
        let gold: BTreeSet<String> = doc_themes.iter().map(|&t| names[t].clone()).collect();
        comments.push(RawComment {
            id: format!("s{d:05}"),
            text: words.join(" "),
            gold: Some(gold),
        });
    }
    Ok(SynthCorpus {
        comments,
        truth: PlantedTruth {
            themes: names,
            word_theme,
            background,
            planted_seeds: seeds,
        },
    })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Builds a bag-of-vectors embedding table for a synthetic corpus: each
/// theme gets a random direction, its words scatter around it with spread
/// `word_noise`, background words are isotropic, and a text's vector is the
/// normalised mean of its word vectors. Seed strings of every theme are
/// included as seed-term records.
pub fn synth_embeddings<F: Real>(
    corpus: &SynthCorpus,
    themes: &ThemeConfig,
    dim: usize,
    word_noise: f64,
    rng_seed: u64,
) -> Result<EmbeddingTable<F>> {
    if dim == 0 {
        return Err(Error::param("dim must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for _ in 0..themes.len() {
        let mut v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
        normalize_in_place(&mut v);
        directions.push(v);
    }
    let mut word_vec: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let theme_word = |w: &str, t: usize, rng: &mut ChaCha8Rng, map: &mut BTreeMap<String, Vec<f64>>| {
        if !map.contains_key(w) {
            let v = directions[t].iter().map(|&x| x + word_noise * scale * gaussian(rng)).collect();
            map.insert(w.to_owned(), v);
        }
    };
    for (item, &t) in &corpus.truth.word_theme {
        for w in item.split(' ') {
            theme_word(w, t, &mut rng, &mut word_vec);
        }
    }
    for (t, spec) in themes.themes.iter().enumerate() {
        for s in &spec.seeds {
            for w in s.split(' ') {
                theme_word(w, t, &mut rng, &mut word_vec);
            }
        }
    }
    for w in &corpus.truth.background {
        if !word_vec.contains_key(w) {
            let v = (0..dim).map(|_| gaussian(&mut rng) * scale).collect();
            word_vec.insert(w.clone(), v);
        }
    }
    let embed = |text: &str| -> Vec<F> {
        let mut acc = vec![0.0; dim];
        for w in text.split_whitespace() {
            if let Some(v) = word_vec.get(w) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
        }
        normalize_in_place(&mut acc);
        acc.into_iter().map(|x| F::lit(x as f32 as f64)).collect()
    };
    let docs = corpus.comments.iter().map(|c| (c.id.clone(), embed(&c.text))).collect();
    let seeds = themes
        .themes
        .iter()
        .flat_map(|t| t.seeds.iter())
        .map(|s| (s.clone(), embed(s)))
        .collect();
    Ok(EmbeddingTable { dim, docs, seeds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig {
            n_docs: 50,
            ..Default::default()
        };
        let a = generate_corpus(&cfg).unwrap();
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a.comments, b.comments);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn no_theme_rate_and_length_track_configuration() {
        let c = generate_corpus(&SynthConfig::default()).unwrap();
        let n = c.comments.len() as f64;
        let empty = c.comments.iter().filter(|d| d.gold.as_ref().unwrap().is_empty()).count() as f64;
        assert!((empty / n - 0.14).abs() <= 0.03, "no-theme rate {}", empty / n);
        let mean_len = c.comments.iter().map(|d| d.text.split(' ').count()).sum::<usize>() as f64 / n;
        assert!((mean_len - 43.0).abs() <= 4.3, "mean length {mean_len}");
    }

    #[test]
    fn planted_seeds_do_not_collide_across_themes() {
        let c = generate_corpus(&SynthConfig { n_docs: 1, ..Default::default() }).unwrap();
        let o = PreprocessOptions::default();
        let terms = c.truth.processed_terms(&o);
        for a in 0..terms.len() {
            assert!(!c.truth.planted_seeds[a].is_empty());
            for b in a + 1..terms.len() {
                assert!(terms[a].is_disjoint(&terms[b]), "themes {a} and {b} overlap");
            }
        }
    }

    #[test]
    fn inconsistent_marginals_are_rejected() {
        let cfg = SynthConfig {
            theme_marginals: vec![0.0; 6],
            no_theme_prob: 0.5,
            ..Default::default()
        };
        assert!(generate_corpus(&cfg).is_err());
    }

    #[test]
    fn embeddings_cover_docs_and_seeds() {
        let c = generate_corpus(&SynthConfig { n_docs: 20, ..Default::default() }).unwrap();
        let themes = ThemeConfig::default_config();
        let t: EmbeddingTable<f64> = synth_embeddings(&c, &themes, 16, 0.5, 1).unwrap();
        assert_eq!(t.docs.len(), 20);
        assert!(t.seed("heart failure").is_ok());
        let bytes = t.to_bytes().unwrap();
        assert_eq!(EmbeddingTable::<f64>::from_bytes(&bytes).unwrap(), t);
    }
}
