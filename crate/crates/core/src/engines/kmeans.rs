//! Spherical k-means on unit vectors with fixed initial centroids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{dot, normalize_in_place, Real};

pub fn unit<F: Real>(v: &[F]) -> Vec<F> {
    let mut u = v.to_vec();
    normalize_in_place(&mut u);
    u
}

/// Index of the most similar centroid; ties go to the lowest index.
pub fn nearest<F: Real>(centroids: &[Vec<F>], x: &[F]) -> usize {
    let mut best = 0;
    let mut best_sim = F::neg_infinity();
    for (c, mu) in centroids.iter().enumerate() {
        let s = dot(mu, x);
        if s > best_sim {
            best = c;
            best_sim = s;
        }
    }
    best
}

/// Extends `centroids` to `k` by k-means++ sampling over unit `points`,
/// using squared chordal distance `2 - 2 cos`. When every point coincides
/// with a centroid the lowest-index point not yet picked is used.
pub fn plus_plus<F: Real>(points: &[Vec<F>], mut centroids: Vec<Vec<F>>, k: usize, rng_seed: u64) -> Vec<Vec<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked: Vec<usize> = Vec::new();
    while centroids.len() < k && !points.is_empty() {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|c| (2.0 - 2.0 * dot(c, p).as_f64()).max(0.0))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let choice = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            (0..points.len()).find(|i| !picked.contains(i)).unwrap_or(0)
        };
        picked.push(choice);
        centroids.push(points[choice].clone());
    }
    centroids
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering<F> {
    pub centroids: Vec<Vec<F>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

/// Lloyd iterations from the given centroids. Empty clusters keep their
/// centroid; stops when assignments repeat or after `max_iters` updates.
pub fn spherical_kmeans<F: Real>(points: &[Vec<F>], init: Vec<Vec<F>>, max_iters: usize) -> Clustering<F> {
    let mut centroids = init;
    let dim = centroids.first().map(Vec::len).unwrap_or(0);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![vec![F::zero(); dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, &x) in sums[a].iter_mut().zip(p) {
                *s = *s + x;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            if counts[c] > 0 {
                let u = unit(&sum);
                if u.iter().any(|x| *x != F::zero()) {
                    centroids[c] = u;
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Clustering {
        centroids,
        assignment,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_assignment_is_nearest_initial_centroid() {
        let pts = [vec![1.0, 0.1], vec![0.1, 1.0], vec![0.9, 0.0]];
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| unit(p)).collect();
        let c = spherical_kmeans(&pts, vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        assert_eq!(c.assignment, vec![0, 1, 0]);
        assert_eq!(c.iterations, 0);
    }

    #[test]
    fn empty_cluster_keeps_centroid() {
        let pts: Vec<Vec<f64>> = vec![unit(&[1.0, 0.0]), unit(&[1.0, 0.1])];
        let c = spherical_kmeans(&pts, vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 10);
        assert_eq!(c.centroids[1], vec![-1.0, 0.0]);
        assert_eq!(c.assignment, vec![0, 0]);
    }

    #[test]
    fn plus_plus_falls_back_to_first_unpicked_point() {
        let pts: Vec<Vec<f64>> = vec![vec![1.0, 0.0]; 3];
        let cs = plus_plus(&pts, vec![vec![1.0, 0.0]], 3, 7);
        assert_eq!(cs.len(), 3);
        let again = plus_plus(&pts, vec![vec![1.0, 0.0]], 3, 7);
        assert_eq!(cs, again);
    }

    #[test]
    fn plus_plus_prefers_distant_points() {
        let pts: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let cs = plus_plus(&pts, vec![vec![1.0, 0.0]], 2, 0);
        assert_eq!(cs[1], vec![-1.0, 0.0]);
    }
}
