#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use smic::{AtomMatrix, EmbeddingCollection};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let v = gaussian(rng, dim);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

pub fn row_f64(z: &EmbeddingCollection, i: usize) -> Vec<f64> {
    z.row(i).iter().map(|&x| x as f64).collect()
}

pub struct Planted {
    pub generators: AtomMatrix,
    pub items: EmbeddingCollection,
}

/// Items built from `sparsity` random unit generators with coefficients of
/// random sign and magnitude in [1, 2], plus Gaussian noise at `noise` times
/// the signal norm, renormalized to norm 20.
pub fn planted(dim: usize, n_gen: usize, n_items: usize, sparsity: usize, noise: f64, seed: u64) -> Planted {
    let mut rng = rng(seed);
    let atoms: Vec<Vec<f64>> = (0..n_gen).map(|_| unit(&mut rng, dim)).collect();
    let mut flat = Vec::with_capacity(dim * n_items);
    for _ in 0..n_items {
        let mut z = vec![0.0; dim];
        for j in sample(&mut rng, n_gen, sparsity.min(n_gen)) {
            let mag: f64 = rng.random_range(1.0..2.0);
            let c = if rng.random::<bool>() { mag } else { -mag };
            for (zi, ti) in z.iter_mut().zip(&atoms[j]) {
                *zi += c * ti;
            }
        }
        let s = dot(&z, &z).sqrt();
        let e = unit(&mut rng, dim);
        for (zi, ei) in z.iter_mut().zip(&e) {
            *zi += noise * s * ei;
        }
        let n = dot(&z, &z).sqrt();
        flat.extend(z.iter().map(|x| (20.0 * x / n) as f32));
    }
    Planted {
        generators: AtomMatrix::from_atoms(&atoms).unwrap(),
        items: EmbeddingCollection::from_flat(dim, flat).unwrap(),
    }
}

/// Brute-force frontier: Pareto filter, then drop every point lying on or
/// below a chord between two other Pareto points that straddle it.
/// Duplicates keep the lowest index. Returned in increasing rate.
pub fn hull_oracle(points: &[(f64, f64)]) -> Vec<usize> {
    let n = points.len();
    let dominated = |i: usize| {
        let p = points[i];
        (0..n).any(|j| {
            let q = points[j];
            j != i && q.0 <= p.0 && q.1 >= p.1 && (q.0 < p.0 || q.1 > p.1 || j < i)
        })
    };
    let pareto: Vec<usize> = (0..n).filter(|&i| !dominated(i)).collect();
    let mut keep: Vec<usize> = pareto
        .iter()
        .copied()
        .filter(|&i| {
            let p = points[i];
            !pareto.iter().any(|&a| {
                pareto.iter().any(|&b| {
                    let (pa, pb) = (points[a], points[b]);
                    if !(pa.0 < p.0 && p.0 < pb.0) {
                        return false;
                    }
                    let chord = pa.1 + (pb.1 - pa.1) * (p.0 - pa.0) / (pb.0 - pa.0);
                    p.1 <= chord
                })
            })
        })
        .collect();
    keep.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    keep
}

/// Random rate/fidelity clouds; a few points share a rate or are repeated.
pub fn random_points(rng: &mut impl Rng, max_len: usize) -> Vec<(f64, f64)> {
    let len = rng.random_range(1..=max_len);
    let mut v: Vec<(f64, f64)> = Vec::with_capacity(len);
    for _ in 0..len {
        let roll: f64 = rng.random();
        let p = if roll < 0.05 && !v.is_empty() {
            v[rng.random_range(0..v.len())]
        } else if roll < 0.1 && !v.is_empty() {
            (v[rng.random_range(0..v.len())].0, rng.random_range(-1.0..1.0))
        } else {
            (rng.random_range(0.5..500.0), rng.random_range(-1.0..1.0))
        };
        v.push(p);
    }
    v
}
