//! Seeded k-means++ / Lloyd clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    /// Number of centroids actually seeded: `min(k, distinct points)`.
    pub k_effective: usize,
}

impl Clustering {
    /// Fraction of points in each seeded cluster.
    pub fn proportions(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.k_effective];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        let n = self.assignments.len() as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    while centroids.len() < k {
        let dists: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = dists.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = dists.iter().rposition(|d| *d > 0.0).expect("positive distance exists");
        for (i, d) in dists.iter().enumerate() {
            if *d > 0.0 && target < *d {
                chosen = i;
                break;
            }
            target -= d;
        }
        centroids.push(points[chosen].clone());
    }
    centroids
}

/// Clusters `points` (all of equal dimension) into at most `k` groups. The
/// result depends on the order of `points`; callers wanting order
/// independence must sort them canonically first.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Clustering {
    if points.is_empty() || k == 0 {
        return Clustering {
            assignments: Vec::new(),
            k_effective: 0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k.min(points.len()), &mut rng);
    let dim = points[0].len();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();

    for _ in 0..max_iters {
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if counts[c] > 0 {
                *centroid = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }

    Clustering {
        assignments,
        k_effective: centroids.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_groups() {
        let points = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 10.0],
            vec![10.1, 10.0],
        ];
        let c = kmeans(&points, 2, 3, 50);
        assert_eq!(c.k_effective, 2);
        assert_eq!(c.assignments[0], c.assignments[1]);
        assert_eq!(c.assignments[2], c.assignments[3]);
        assert_ne!(c.assignments[0], c.assignments[2]);
        assert_eq!(c.proportions(), vec![0.5, 0.5]);
    }

    #[test]
    fn duplicates_limit_effective_k() {
        let points = vec![vec![1.0, 0.0]; 5];
        let c = kmeans(&points, 50, 0, 10);
        assert_eq!(c.k_effective, 1);
        assert_eq!(c.proportions(), vec![1.0]);
    }

    #[test]
    fn deterministic_for_seed() {
        let points: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        assert_eq!(kmeans(&points, 4, 9, 100), kmeans(&points, 4, 9, 100));
    }
}
