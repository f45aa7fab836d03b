// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lloyd's algorithm with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans {
    /// `k×n`, one centroid per row.
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Assignments stopped changing before the iteration cap.
    pub converged: bool,
}

impl KMeans {
    /// Index of the nearest centroid (squared Euclidean, lowest index on ties).
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x)
    }
}

/// Clusters the rows of `points` into `k` groups. Deterministic for a given seed.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<KMeans> {
    let (rows, n) = points.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > rows {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {rows} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);

    let mut assignments = vec![usize::MAX; rows];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        for (i, slot) in assignments.iter_mut().enumerate() {
            let c = nearest(&centroids, points.row(i));
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
        let mut sums = Matrix::zeros(k, n);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            // An emptied cluster keeps its previous centroid.
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    Ok(KMeans {
        centroids,
        assignments,
        iterations,
        converged,
    })
}

fn seed_plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let (rows, n) = points.shape();
    let mut centroids = Matrix::zeros(k, n);
    let first = rng.random_range(0..rows);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..rows)
        .map(|i| sq_dist(points.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = rows - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with existing centroids.
            rng.random_range(0..rows)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn nearest(centroids: &Matrix, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.rows() {
        let d = sq_dist(centroids.row(c), x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
