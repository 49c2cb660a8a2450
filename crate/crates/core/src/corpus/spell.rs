//! Corpus-frequency spelling correction.
//!
//! A token not found in the lexicon is replaced by the most frequent corpus
//! token at edit distance 1 whose frequency is at least [`MIN_RATIO`] times
//! its own.

use std::collections::{HashMap, HashSet};

pub const MIN_RATIO: usize = 5;

const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, Default)]
pub struct SpellCorrector {
    lexicon: HashSet<String>,
    counts: HashMap<String, usize>,
}

impl SpellCorrector {
    /// `tokens` is the lowercased, tokenised corpus before stopword removal.
    pub fn from_tokens<'a, I>(tokens: I, lexicon: HashSet<String>) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts = HashMap::new();
        for t in tokens {
            *counts.entry(t.to_owned()).or_insert(0) += 1;
        }
        SpellCorrector { lexicon, counts }
    }

    pub fn count(&self, token: &str) -> usize {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn correct(&self, token: &str) -> String {
        if self.lexicon.contains(token) {
            return token.to_owned();
        }
        let own = self.count(token).max(1);
        let mut best: Option<(usize, String)> = None;
        for cand in edits1(token) {
            let c = self.count(&cand);
            if c < MIN_RATIO * own {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bc, bs)) => c > *bc || (c == *bc && cand < *bs),
            };
            if better {
                best = Some((c, cand));
            }
        }
        best.map(|(_, s)| s).unwrap_or_else(|| token.to_owned())
    }
}

fn edits1(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let mut out = Vec::with_capacity(n * 75 + 36);
    let build = |v: &[char]| v.iter().collect::<String>();
    for i in 0..n {
        let mut v = chars.clone();
        v.remove(i);
        out.push(build(&v));
    }
    for i in 0..n.saturating_sub(1) {
        let mut v = chars.clone();
        v.swap(i, i + 1);
        out.push(build(&v));
    }
    for i in 0..n {
        for a in ALPHABET.chars() {
            if a != chars[i] {
                let mut v = chars.clone();
                v[i] = a;
                out.push(build(&v));
            }
        }
    }
    for i in 0..=n {
        for a in ALPHABET.chars() {
            let mut v = chars.clone();
            v.insert(i, a);
            out.push(build(&v));
        }
    }
    out.retain(|s| !s.is_empty() && s != word);
    out
}
