//! k-means (k-means++ seeding, Lloyd iterations) and silhouette scores.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MAX_ITER: usize = 30;
pub const DEFAULT_SAMPLE: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Indices into the input of the clustered points.
    pub sample: Vec<usize>,
    /// Cluster of each sampled point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub silhouette: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn kmeans_pp<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, w) in d.iter().enumerate() {
                if r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].to_vec());
        for (di, p) in d.iter_mut().zip(points) {
            *di = di.min(dist2(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Mean silhouette `(b - a) / max(a, b)` with Euclidean distances.
/// Singleton clusters score 0, as does any point with `a = b = 0`; with
/// fewer than two non-empty clusters the score is 0.
pub fn silhouette(points: &[&[f64]], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist2(points[i], points[j]).sqrt();
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

/// Clusters a random sample of `sample_n` points (all points when fewer are
/// available) into `k` groups and scores the result.
pub fn kmeans_silhouette(points: &[Vec<f64>], k: usize, max_iter: usize, seed: u64, sample_n: usize) -> Result<Clustering> {
    if k < 2 {
        return Err(Error::InvalidArgument("silhouette undefined for K<2".into()));
    }
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("points must be non-empty vectors of one dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = if sample_n >= points.len() {
        (0..points.len()).collect()
    } else {
        sample(&mut rng, points.len(), sample_n).into_vec()
    };
    idx.sort_unstable();
    if k > idx.len() {
        return Err(Error::InvalidArgument(format!("K={k} exceeds the {} sampled points", idx.len())));
    }
    let pts: Vec<&[f64]> = idx.iter().map(|&i| points[i].as_slice()).collect();
    let mut centroids = kmeans_pp(&pts, k, &mut rng);
    let mut labels: Vec<usize> = pts.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in pts.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            // an empty cluster keeps its previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = pts.iter().map(|p| nearest(p, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let silhouette = silhouette(&pts, &labels);
    Ok(Clustering {
        sample: idx,
        assignments: labels,
        centroids,
        silhouette,
    })
}
