use serde::{Deserialize, Serialize};

use super::{EncodedDoc, TermId, Vocabulary};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sparse TF-IDF rows with smoothed idf `ln((1+N)/(1+df)) + 1` and unit L2
/// norm. Raw term counts are kept alongside for count-based engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfMatrix<F> {
    pub n_terms: usize,
    pub rows: Vec<Vec<(TermId, F)>>,
    pub counts: Vec<Vec<(TermId, u32)>>,
    pub idf: Vec<F>,
    /// Row norms before normalisation.
    pub norms: Vec<F>,
}

pub fn smoothed_idf<F: Real>(n_docs: usize, df: usize) -> F {
    let n = F::from_count(n_docs);
    let df = F::from_count(df);
    ((F::one() + n) / (F::one() + df)).ln() + F::one()
}

pub fn tfidf<F: Real>(docs: &[EncodedDoc], vocab: &Vocabulary) -> Result<TfIdfMatrix<F>> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let idf: Vec<F> = vocab
        .terms()
        .iter()
        .map(|t| smoothed_idf(vocab.n_docs(), t.df))
        .collect();
    let counts = docs.iter().map(EncodedDoc::counts).collect();
    Ok(TfIdfMatrix::from_counts(counts, idf))
}

impl<F: Real> TfIdfMatrix<F> {
    pub fn from_counts(counts: Vec<Vec<(TermId, u32)>>, idf: Vec<F>) -> Self {
        let mut rows = Vec::with_capacity(counts.len());
        let mut norms = Vec::with_capacity(counts.len());
        for row in &counts {
            let mut w: Vec<(TermId, F)> = row
                .iter()
                .map(|&(t, c)| (t, F::from_count(c as usize) * idf[t]))
                .collect();
            let norm = w.iter().map(|&(_, x)| x * x).sum::<F>().sqrt();
            if norm > F::zero() {
                for (_, x) in w.iter_mut() {
                    *x = *x / norm;
                }
            }
            norms.push(norm);
            rows.push(w);
        }
        TfIdfMatrix {
            n_terms: idf.len(),
            rows,
            counts,
            idf,
            norms,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn weight(&self, doc: usize, term: TermId) -> F {
        self.rows[doc]
            .iter()
            .find(|(t, _)| *t == term)
            .map(|&(_, w)| w)
            .unwrap_or_else(F::zero)
    }

    /// Binary presence sets (weight > 0) per document.
    pub fn presence(&self) -> Vec<Vec<TermId>> {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|(_, w)| *w > F::zero()).map(|&(t, _)| t).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, ProcessedDoc};

    fn docs(rows: &[&[&str]]) -> (Vec<EncodedDoc>, Vocabulary) {
        let pd: Vec<ProcessedDoc> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| ProcessedDoc {
                id: i.to_string(),
                tokens: r.iter().map(|s| s.to_string()).collect(),
                bigrams: vec![],
                gold: None,
            })
            .collect();
        let v = build_vocabulary(&pd, 1, &[]).unwrap();
        (pd.iter().map(|d| v.encode(d)).collect(), v)
    }

    #[test]
    fn single_doc_two_terms() {
        let (d, v) = docs(&[&["pain", "stoma"]]);
        let m: TfIdfMatrix<f64> = tfidf(&d, &v).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((m.rows[0][0].1 - h).abs() < 1e-15);
        assert!((m.rows[0][1].1 - h).abs() < 1e-15);
    }

    #[test]
    fn repeated_term_normalises_to_one_and_absent_is_zero() {
        let (d, v) = docs(&[&["pain", "pain"], &["stoma", "care"]]);
        let m: TfIdfMatrix<f64> = tfidf(&d, &v).unwrap();
        assert_eq!(m.rows[0], vec![(v.id("pain").unwrap(), 1.0)]);
        assert_eq!(m.weight(0, v.id("stoma").unwrap()), 0.0);
        assert_eq!(m.counts[0], vec![(v.id("pain").unwrap(), 2)]);
    }

    #[test]
    fn idf_matches_formula() {
        let (d, v) = docs(&[&["a", "b"], &["a", "c"], &["a", "b"]]);
        let m: TfIdfMatrix<f64> = tfidf(&d, &v).unwrap();
        let expect_b = (4.0f64 / 3.0).ln() + 1.0;
        assert!((m.idf[v.id("b").unwrap()] - expect_b).abs() < 1e-15);
        assert!((m.idf[v.id("a").unwrap()] - 1.0).abs() < 1e-15);
    }
}
