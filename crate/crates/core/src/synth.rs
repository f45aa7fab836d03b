// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic corpora with known ground truth.
//!
//! Used by the test suites and handy for smoke-testing the CLI without real
//! encoder output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{normalize_in_place, EmbeddingPairSet, Label, PairRecord};
use crate::linalg::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `rows×cols` matrix of independent standard normals.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_row_major(rows, cols, gaussian_vec(&mut r, rows * cols)).expect("finite samples")
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the signs of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal(n: usize, seed: u64) -> Matrix {
    let g = gaussian_matrix(n, n, seed).to_nalgebra();
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    Matrix::from_fn(n, n, |i, j| {
        let s = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * s
    })
}

/// Uniform point on the unit sphere in `n` dimensions.
pub fn unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    random_unit(&mut r, n)
}

pub fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian_vec(rng, n);
        let norm = crate::linalg::norm2(&v);
        if norm > 1e-12 {
            v.iter_mut().for_each(|e| *e /= norm);
            return v;
        }
    }
}

/// `n×n` rotation by `deg` degrees in the `(i, j)` coordinate plane.
pub fn plane_rotation(n: usize, i: usize, j: usize, deg: f64) -> Matrix {
    let (s, c) = deg.to_radians().sin_cos();
    let mut m = Matrix::identity(n);
    m.set(i, i, c);
    m.set(j, j, c);
    m.set(i, j, -s);
    m.set(j, i, s);
    m
}

/// A corpus with an exactly affine ground truth.
#[derive(Debug, Clone)]
pub struct PlantedAffine {
    pub set: EmbeddingPairSet,
    pub q: Matrix,
    pub t0: Vec<f64>,
}

/// `count` positives with `x` uniform on the unit sphere and
/// `x′ = Q·x + t₀` exactly, `Q` random orthogonal, `‖t₀‖₂ = 0.3`.
pub fn planted_affine(n: usize, count: usize, seed: u64) -> PlantedAffine {
    let q = random_orthogonal(n, seed ^ 0x51_7c_c1_b7);
    let mut r = rng(seed);
    let t0: Vec<f64> = random_unit(&mut r, n)
        .into_iter()
        .map(|v| 0.3 * v)
        .collect();
    let records = (0..count)
        .map(|_| {
            let x = random_unit(&mut r, n);
            let mut y = q.matvec(&x).expect("square");
            y.iter_mut().zip(&t0).for_each(|(v, s)| *v += s);
            PairRecord::new(Label::Positive, x, y)
        })
        .collect();
    PlantedAffine {
        set: EmbeddingPairSet::new("planted", n, records).expect("finite"),
        q,
        t0,
    }
}

/// Two regions of source space, each with its own exact affine map.
#[derive(Debug, Clone)]
pub struct PlantedRegions {
    pub set: EmbeddingPairSet,
    pub maps: Vec<Matrix>,
    pub shifts: Vec<Vec<f64>>,
    /// Region of each pair.
    pub region: Vec<usize>,
}

/// `per_region` positives around `+e₀` and as many around `−e₀`; region `c`
/// maps `x ↦ Q_c·x + t_c` exactly.
pub fn two_planted_clusters(n: usize, per_region: usize, seed: u64) -> PlantedRegions {
    let mut r = rng(seed);
    let maps: Vec<Matrix> = (0..2)
        .map(|c| random_orthogonal(n, seed * 31 + c))
        .collect();
    let shifts: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            random_unit(&mut r, n)
                .into_iter()
                .map(|v| 0.2 * v)
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut region = Vec::new();
    for k in 0..2 * per_region {
        let c = k % 2;
        let mut x = gaussian_vec(&mut r, n);
        x.iter_mut().for_each(|v| *v *= 0.15);
        x[0] += if c == 0 { 1.0 } else { -1.0 };
        normalize_in_place(&mut x);
        let mut y = maps[c].matvec(&x).expect("square");
        y.iter_mut().zip(&shifts[c]).for_each(|(v, s)| *v += s);
        records.push(PairRecord::new(Label::Positive, x, y));
        region.push(c);
    }
    PlantedRegions {
        set: EmbeddingPairSet::new("regions", n, records).expect("finite"),
        maps,
        shifts,
        region,
    }
}

/// Knobs for [`paraphrase_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub dim: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Standard deviation of the per-coordinate noise added to positives.
    pub noise: f64,
    /// How far the planted linear part is from orthogonal:
    /// `A₀ = Q·(I + stretch·G)` with `G` a fixed symmetric Gaussian matrix.
    pub stretch: f64,
    /// Fixes the planted map.
    pub seed: u64,
    /// Selects an independent sample from the same planted map.
    pub split: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            dim: 16,
            positives: 400,
            negatives: 400,
            noise: 0.05,
            stretch: 0.0,
            seed: 1,
            split: 0,
        }
    }
}

/// Labeled, L2-normalized corpus. Positives are noisy images of a planted
/// affine map, re-projected to the sphere; negatives pair each source with an
/// unrelated random unit vector.
pub fn paraphrase_corpus(spec: &CorpusSpec) -> EmbeddingPairSet {
    let n = spec.dim;
    let q = random_orthogonal(n, spec.seed ^ 0xabcdef);
    let g = gaussian_matrix(n, n, spec.seed ^ 0x1234);
    let sym = Matrix::from_fn(n, n, |i, j| {
        let base = if i == j { 1.0 } else { 0.0 };
        base + spec.stretch * 0.5 * (g.get(i, j) + g.get(j, i)) / (n as f64).sqrt()
    });
    let a0 = q.matmul(&sym).expect("square");
    let mut r = rng(spec.seed);
    let t0: Vec<f64> = random_unit(&mut r, n)
        .into_iter()
        .map(|v| 0.1 * v)
        .collect();
    let mut r = rng(spec.seed
        ^ spec
            .split
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(1));

    let mut records = Vec::with_capacity(spec.positives + spec.negatives);
    for i in 0..spec.positives + spec.negatives {
        let x = random_unit(&mut r, n);
        let positive = i < spec.positives;
        let y = if positive {
            let mut y = a0.matvec(&x).expect("square");
            for (k, v) in y.iter_mut().enumerate() {
                *v += t0[k] + spec.noise * r.sample::<f64, _>(StandardNormal);
            }
            normalize_in_place(&mut y);
            y
        } else {
            random_unit(&mut r, n)
        };
        let label = if positive {
            Label::Positive
        } else {
            Label::Negative
        };
        records.push(PairRecord::new(label, x, y));
    }
    // Interleave classes so prefixes are mixed.
    let mut order: Vec<usize> = (0..records.len()).collect();
    for i in (1..order.len()).rev() {
        let j = r.random_range(0..=i);
        order.swap(i, j);
    }
    let records = order.into_iter().map(|i| records[i].clone()).collect();
    EmbeddingPairSet::new("corpus", n, records).expect("finite")
}

/// Knobs for [`clustered_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct ClusteredSpec {
    pub dim: usize,
    pub clusters: usize,
    /// Pairs per cluster, alternating positive and negative.
    pub per_cluster: usize,
    pub noise: f64,
    /// Spread of sources around their cluster centre before normalization.
    pub spread: f64,
    /// Fixes the centres and the shared map.
    pub seed: u64,
}

impl Default for ClusteredSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            clusters: 15,
            per_cluster: 40,
            noise: 0.5,
            spread: 0.3,
            seed: 99,
        }
    }
}

/// One draw from a clustered corpus: sources gather around `clusters` fixed
/// centres and every positive follows the same orthogonal map plus noise.
/// Different `split` values give independent samples (such as train and
/// held-out splits) of the same population.
pub fn clustered_corpus(spec: &ClusteredSpec, split: u64) -> EmbeddingPairSet {
    let n = spec.dim;
    let mut r = rng(spec.seed);
    let centres: Vec<Vec<f64>> = (0..spec.clusters).map(|_| random_unit(&mut r, n)).collect();
    let q = random_orthogonal(n, spec.seed ^ 0x5eed);
    let mut r = rng(spec.seed ^ split.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    let mut records = Vec::with_capacity(spec.clusters * spec.per_cluster);
    for centre in &centres {
        for i in 0..spec.per_cluster {
            let mut x: Vec<f64> = gaussian_vec(&mut r, n)
                .into_iter()
                .zip(centre)
                .map(|(g, m)| m + spec.spread * g)
                .collect();
            normalize_in_place(&mut x);
            let positive = i % 2 == 0;
            let y = if positive {
                let mut y = q.matvec(&x).expect("square");
                for v in &mut y {
                    *v += spec.noise * r.sample::<f64, _>(StandardNormal);
                }
                normalize_in_place(&mut y);
                y
            } else {
                random_unit(&mut r, n)
            };
            let label = if positive {
                Label::Positive
            } else {
                Label::Negative
            };
            records.push(PairRecord::new(label, x, y));
        }
    }
    EmbeddingPairSet::new("clustered", n, records).expect("finite")
}
