//! Dictionary learning by alternating minimization of
//!
//! ```text
//! 1/2 ‖Z - T C‖²_F + lambda ‖C‖₁    subject to ‖t_j‖ = 1
//! ```
//!
//! Each alternation sparse-codes every item against the current atoms
//! (warm-started coordinate descent), then updates the atoms one at a time.
//! For atom `j` with coefficient row `c_j` and residual `R = Z - T C`, the
//! minimizer on the unit sphere is the normalized
//! `t_j ‖c_j‖² + R c_jᵀ`. Atoms no item uses are reseeded from the item with
//! the largest reconstruction error.

use log::debug;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dictionary::{AtomMatrix, Dictionary, MAX_ATOMS};
use crate::embedding_store::{check_dim, dot, norm, EmbeddingCollection};
use crate::semantic_ops::DEGENERATE_NORM;
use crate::sparse_coder::{atom_norms_sq, check_lambda, descend, SolverOptions, SparseCode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnOptions {
    pub seed: u64,
    pub max_alternations: usize,
    /// Stop when an alternation lowers the objective by less than this
    /// fraction.
    pub rel_obj_tol: f64,
    pub coder: SolverOptions,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_alternations: 100,
            rel_obj_tol: 1e-4,
            coder: SolverOptions::default(),
        }
    }
}

impl LearnOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_alternations == 0 {
            return Err(Error::InvalidParameter("max_alternations must be >= 1".into()));
        }
        if !(self.rel_obj_tol.is_finite() && self.rel_obj_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_obj_tol must be > 0".into()));
        }
        self.coder.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternation {
    /// Objective after the coding step, before the atom update.
    pub objective_after_coding: f64,
    /// Objective at the end of the alternation.
    pub objective: f64,
    /// Atoms reseeded during this alternation.
    pub reinitialized: Vec<usize>,
    /// Items whose coordinate descent hit the sweep limit.
    pub unconverged_items: usize,
}

#[derive(Debug, Clone)]
pub struct LearnReport {
    pub dictionary: Dictionary,
    /// Codes from the last coding step.
    pub codes: Vec<SparseCode>,
    /// Objective of the initial atoms with all-zero codes.
    pub initial_objective: f64,
    pub history: Vec<Alternation>,
    pub converged: bool,
}

pub fn learn_dictionary(z: &EmbeddingCollection, n_atoms: usize, lambda: f64, opts: &LearnOptions) -> Result<Dictionary> {
    learn_dictionary_traced(z, n_atoms, lambda, opts).map(|r| r.dictionary)
}

/// Same as [`learn_dictionary`], keeping the per-alternation history.
pub fn learn_dictionary_traced(
    z: &EmbeddingCollection,
    n_atoms: usize,
    lambda: f64,
    opts: &LearnOptions,
) -> Result<LearnReport> {
    if z.is_empty() {
        return Err(Error::EmptyCollection);
    }
    if n_atoms == 0 || n_atoms > MAX_ATOMS {
        return Err(Error::InvalidParameter(format!("n_atoms {n_atoms} outside 1..={MAX_ATOMS}")));
    }
    check_lambda(lambda)?;
    opts.validate()?;

    let items: Vec<Vec<f64>> = z.items().map(|v| v.into_values()).collect();
    if items.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    let dim = z.dim();
    let mut atoms = initial_atoms(&items, dim, n_atoms, opts.seed);
    let mut coefs = vec![vec![0.0; n_atoms]; items.len()];
    let mut residuals = items.clone();
    let initial_objective = 0.5 * residuals.iter().map(|r| dot(r, r)).sum::<f64>();

    let mut history: Vec<Alternation> = Vec::new();
    let mut converged = false;
    let mut previous = initial_objective;
    for alt in 0..opts.max_alternations {
        let unconverged = code_all(&items, &atoms, lambda, &opts.coder, &mut coefs, &mut residuals);
        let after_coding = objective_from_parts(&residuals, &coefs, lambda);

        let dead = update_atoms(&mut atoms, &coefs, &mut residuals);
        let reinitialized = reseed_dead_atoms(&mut atoms, &dead, &items, &residuals, opts.seed, alt);
        let current = objective_from_parts(&residuals, &coefs, lambda);
        debug!(
            "alternation {alt}: objective {current:.6} (after coding {after_coding:.6}), {} reseeded, {unconverged} unconverged",
            reinitialized.len()
        );
        let rel_drop = if previous > 0.0 { (previous - current) / previous } else { 0.0 };
        let quiet = reinitialized.is_empty();
        history.push(Alternation {
            objective_after_coding: after_coding,
            objective: current,
            reinitialized,
            unconverged_items: unconverged,
        });
        previous = current;
        if quiet && alt > 0 && rel_drop < opts.rel_obj_tol {
            converged = true;
            break;
        }
    }

    let dictionary = Dictionary::new(atoms)?;
    let codes = coefs.iter().map(|c| SparseCode::from_dense(c)).collect();
    Ok(LearnReport {
        dictionary,
        codes,
        initial_objective,
        history,
        converged,
    })
}

/// `1/2 ‖Z - T C‖²_F + lambda Σ|c|`.
pub fn objective(z: &EmbeddingCollection, atoms: &AtomMatrix, codes: &[SparseCode], lambda: f64) -> Result<f64> {
    check_dim(atoms.dim(), z.dim())?;
    if codes.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: codes.len(),
        });
    }
    let mut total = 0.0;
    for (item, code) in z.items().zip(codes) {
        if code.n_atoms() != atoms.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: atoms.n_atoms(),
                found: code.n_atoms(),
            });
        }
        let recon = atoms.synthesize(code.entries().iter().copied());
        let sq: f64 = item.values().iter().zip(&recon).map(|(a, b)| (a - b) * (a - b)).sum();
        total += 0.5 * sq + lambda * code.l1_norm();
    }
    Ok(total)
}

fn objective_from_parts(residuals: &[Vec<f64>], coefs: &[Vec<f64>], lambda: f64) -> f64 {
    let fit: f64 = residuals.iter().map(|r| dot(r, r)).sum();
    let l1: f64 = coefs.iter().flatten().map(|c| c.abs()).sum();
    0.5 * fit + lambda * l1
}

/// Seeded sample of distinct items, unit-normalized. When there are fewer
/// items than atoms the remainder are perturbed copies.
fn initial_atoms(items: &[Vec<f64>], dim: usize, n_atoms: usize, seed: u64) -> AtomMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, items.len(), n_atoms.min(items.len())).into_vec();
    let mut data = Vec::with_capacity(n_atoms * dim);
    for k in 0..n_atoms {
        let base = &items[picked[k % picked.len()]];
        let mut atom = if norm(base) > DEGENERATE_NORM {
            unit(base)
        } else {
            random_unit(&mut rng, dim)
        };
        if k >= picked.len() {
            let noise = random_unit(&mut rng, dim);
            for (a, e) in atom.iter_mut().zip(&noise) {
                *a += 0.1 * e;
            }
            atom = unit(&atom);
        }
        data.extend(atom);
    }
    AtomMatrix::new(dim, data).expect("unit atoms")
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if norm(&v) > DEGENERATE_NORM {
            return unit(&v);
        }
    }
}

/// Sparse-codes every item from its warm start. Recomputes residuals against
/// the current atoms first. Returns the number of unconverged items.
fn code_all(
    items: &[Vec<f64>],
    atoms: &AtomMatrix,
    lambda: f64,
    opts: &SolverOptions,
    coefs: &mut [Vec<f64>],
    residuals: &mut [Vec<f64>],
) -> usize {
    let gram_diag = atom_norms_sq(atoms);
    items
        .par_iter()
        .zip(coefs.par_iter_mut())
        .zip(residuals.par_iter_mut())
        .map(|((z, c), r)| {
            let recon = atoms.synthesize(c.iter().copied().enumerate().filter(|e| e.1 != 0.0));
            for ((ri, zi), xi) in r.iter_mut().zip(z).zip(&recon) {
                *ri = zi - xi;
            }
            let (ok, _) = descend(atoms, &gram_diag, lambda, opts, c, r, |_, _| {});
            usize::from(!ok)
        })
        .sum()
}

/// Block-coordinate pass over the atoms. Residuals are kept consistent with
/// the updated atoms. Returns the atoms no item uses.
fn update_atoms(atoms: &mut AtomMatrix, coefs: &[Vec<f64>], residuals: &mut [Vec<f64>]) -> Vec<usize> {
    let dim = atoms.dim();
    let mut dead = Vec::new();
    for j in 0..atoms.n_atoms() {
        let users: Vec<(usize, f64)> = coefs
            .iter()
            .enumerate()
            .filter(|(_, c)| c[j] != 0.0)
            .map(|(i, c)| (i, c[j]))
            .collect();
        let energy: f64 = users.iter().map(|(_, c)| c * c).sum();
        if energy == 0.0 {
            dead.push(j);
            continue;
        }
        let old = atoms.atom(j).to_vec();
        let mut u: Vec<f64> = old.iter().map(|t| t * energy).collect();
        for &(i, c) in &users {
            for (ui, ri) in u.iter_mut().zip(&residuals[i]) {
                *ui += c * ri;
            }
        }
        let un = norm(&u);
        if un.is_nan() || un <= DEGENERATE_NORM {
            continue;
        }
        let new: Vec<f64> = u.iter().map(|x| x / un).collect();
        let delta: Vec<f64> = old.iter().zip(&new).map(|(o, n)| o - n).collect();
        for &(i, c) in &users {
            for (ri, d) in residuals[i].iter_mut().zip(&delta) {
                *ri += c * d;
            }
        }
        atoms.atom_mut(j)[..dim].copy_from_slice(&new);
    }
    dead
}

/// Replaces each dead atom with the next worst-reconstructed item.
fn reseed_dead_atoms(
    atoms: &mut AtomMatrix,
    dead: &[usize],
    items: &[Vec<f64>],
    residuals: &[Vec<f64>],
    seed: u64,
    alternation: usize,
) -> Vec<usize> {
    if dead.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<(usize, f64)> = residuals.iter().map(|r| dot(r, r)).enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (alternation as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for (k, &j) in dead.iter().enumerate() {
        let item = &items[order[k % order.len()].0];
        let atom = if norm(item) > DEGENERATE_NORM {
            unit(item)
        } else {
            random_unit(&mut rng, atoms.dim())
        };
        atoms.atom_mut(j).copy_from_slice(&atom);
    }
    dead.to_vec()
}
