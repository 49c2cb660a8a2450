//! One-vs-rest L2-regularised logistic regression over sparse rows.
//!
//! Each class is an independent binary problem minimising mean log-loss plus
//! `l2 / 2 * |w|^2` (bias unpenalised), solved by full-batch Nesterov
//! accelerated gradient descent with a fixed step, so training is exactly
//! reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};

pub type SparseRow<F> = [(usize, F)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub l2: f64,
    pub iterations: usize,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            l2: 3e-5,
            iterations: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrLogistic<F> {
    pub n_features: usize,
    /// Per-class weights, C x n_features.
    pub weights: Vec<Vec<F>>,
    pub bias: Vec<F>,
}

impl<F: Real> OvrLogistic<F> {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        OvrLogistic {
            n_features,
            weights: vec![vec![F::zero(); n_features]; n_classes],
            bias: vec![F::zero(); n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    fn margin(&self, class: usize, row: &SparseRow<F>) -> F {
        let w = &self.weights[class];
        self.bias[class]
            + row
                .iter()
                .filter(|(i, _)| *i < self.n_features)
                .map(|&(i, x)| w[i] * x)
                .sum::<F>()
    }

    /// Per-class probabilities, each in `[0, 1]`.
    pub fn predict(&self, row: &SparseRow<F>) -> Vec<F> {
        (0..self.n_classes()).map(|c| sigmoid(self.margin(c, row))).collect()
    }

    /// Trains every class on `rows` with positive sets `labels`, starting
    /// from the current weights.
    pub fn fit<R: AsRef<SparseRow<F>>>(&mut self, rows: &[R], labels: &[Vec<usize>], params: &LinearParams) -> Result<()> {
        if rows.len() != labels.len() {
            return Err(Error::param("rows and labels differ in length"));
        }
        if rows.is_empty() {
            return Err(Error::engine("classifier has no training rows"));
        }
        if !(params.l2 > 0.0) {
            return Err(Error::param("l2 must be positive"));
        }
        let max_sq = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&(_, x)| x * x).sum::<F>())
            .fold(F::zero(), F::max);
        let lambda = F::lit(params.l2);
        // Lipschitz bound of the gradient, bias feature included
        let lip = F::lit(0.25) * (max_sq + F::one()) + lambda;
        let step = F::one() / lip;
        let n = F::from_count(rows.len());
        for c in 0..self.n_classes() {
            let y: Vec<F> = labels
                .iter()
                .map(|l| if l.contains(&c) { F::one() } else { F::zero() })
                .collect();
            let mut w = self.weights[c].clone();
            let mut b = self.bias[c];
            let mut w_prev = w.clone();
            let mut b_prev = b;
            let mut grad = vec![F::zero(); self.n_features];
            for it in 0..params.iterations {
                let mom = F::from_count(it) / F::from_count(it + 3);
                let v: Vec<F> = w.iter().zip(&w_prev).map(|(&a, &p)| a + mom * (a - p)).collect();
                let vb = b + mom * (b - b_prev);
                for (g, &vi) in grad.iter_mut().zip(&v) {
                    *g = lambda * vi;
                }
                let mut gb = F::zero();
                for (row, &yi) in rows.iter().zip(&y) {
                    let row = row.as_ref();
                    let z = vb + row.iter().filter(|(i, _)| *i < self.n_features).map(|&(i, x)| v[i] * x).sum::<F>();
                    let r = (sigmoid(z) - yi) / n;
                    gb = gb + r;
                    for &(i, x) in row {
                        if i < self.n_features {
                            grad[i] = grad[i] + r * x;
                        }
                    }
                }
                w_prev = std::mem::replace(&mut w, v.iter().zip(&grad).map(|(&vi, &g)| vi - step * g).collect());
                b_prev = b;
                b = vb - step * gb;
            }
            self.weights[c] = w;
            self.bias[c] = b;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_disjoint_features() {
        let rows: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)], vec![(0, 0.9), (2, 0.1)], vec![(1, 1.0)], vec![(1, 0.8), (2, 0.2)]];
        let labels = vec![vec![0], vec![0], vec![1], vec![1]];
        let mut m = OvrLogistic::<f64>::zeros(2, 3);
        m.fit(&rows, &labels, &LinearParams { l2: 1e-3, iterations: 500 }).unwrap();
        let p = m.predict(&[(0, 1.0)]);
        assert!(p[0] > 0.8 && p[1] < 0.2, "{p:?}");
        let q = m.predict(&[(1, 1.0)]);
        assert!(q[1] > 0.8 && q[0] < 0.2, "{q:?}");
    }

    #[test]
    fn converges_to_the_regularised_optimum() {
        // one feature, symmetric data: the optimum has zero bias and the
        // stationarity condition lambda * w = mean((y - p) x)
        let rows: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)], vec![(0, -1.0)], vec![(0, 1.0)], vec![(0, -1.0)]];
        let labels = vec![vec![0], vec![], vec![0], vec![]];
        let mut m = OvrLogistic::<f64>::zeros(1, 1);
        let l2 = 0.1;
        m.fit(&rows, &labels, &LinearParams { l2, iterations: 2000 }).unwrap();
        let w = m.weights[0][0];
        assert!(m.bias[0].abs() < 1e-9);
        assert!((l2 * w - (1.0 - sigmoid(w))).abs() < 1e-9);
    }

    #[test]
    fn probabilities_stay_in_unit_interval() {
        let m = OvrLogistic::<f64> {
            n_features: 1,
            weights: vec![vec![1e4], vec![-1e4]],
            bias: vec![0.0, 0.0],
        };
        for p in m.predict(&[(0, 1.0)]) {
            assert!((0.0..=1.0).contains(&p));
        }
    }
}
