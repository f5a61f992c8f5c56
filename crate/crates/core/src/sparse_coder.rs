//! Per-item Lasso projection,
//!
//! ```text
//! min_c  1/2 ‖z - T c‖² + lambda ‖c‖₁
//! ```
//!
//! solved by cyclic coordinate descent with an explicit residual. Sweeps
//! always visit atoms in ascending index order, so results are deterministic.

use crate::dictionary::AtomMatrix;
use crate::embedding_store::{check_dim, dot, LatentVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the largest coefficient change in a sweep and the KKT
    /// violation both fall below this.
    pub tol: f64,
    /// Maximum number of full sweeps.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("solver tol {} must be > 0", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("solver max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sparse coefficient vector over a dictionary of `n_atoms` atoms.
///
/// Entries are `(atom index, coefficient)` with strictly increasing indices
/// and non-zero finite coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    n_atoms: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseCode {
    pub fn new(n_atoms: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::InvalidParameter("code indices must be strictly increasing".into()));
            }
        }
        for &(j, c) in &entries {
            if j >= n_atoms {
                return Err(Error::IndexOutOfRange {
                    index: j as u64,
                    len: n_atoms as u64,
                });
            }
            if !c.is_finite() {
                return Err(Error::NonFinite("code coefficient"));
            }
            if c == 0.0 {
                return Err(Error::InvalidParameter(format!("coefficient for atom {j} is zero")));
            }
        }
        Ok(Self { n_atoms, entries })
    }

    pub fn empty(n_atoms: usize) -> Self {
        Self {
            n_atoms,
            entries: Vec::new(),
        }
    }

    /// Drops exact zeros from a dense coefficient vector.
    pub fn from_dense(coefs: &[f64]) -> Self {
        Self {
            n_atoms: coefs.len(),
            entries: coefs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, &c)| (j, c))
                .collect(),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c.abs()).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_atoms];
        for &(j, c) in &self.entries {
            out[j] = c;
        }
        out
    }
}

/// Result of a Lasso solve. A non-converged fit still carries the last
/// iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub code: SparseCode,
    pub converged: bool,
    pub sweeps: usize,
}

pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

/// Coordinate descent for a single item.
pub fn lasso_cd(z: &LatentVector, atoms: &AtomMatrix, lambda: f64, opts: &SolverOptions) -> Result<LassoFit> {
    check_dim(atoms.dim(), z.dim())?;
    check_lambda(lambda)?;
    opts.validate()?;
    let gram_diag = atom_norms_sq(atoms);
    let mut coefs = vec![0.0; atoms.n_atoms()];
    let mut residual = z.values().to_vec();
    let (converged, sweeps) = descend(atoms, &gram_diag, lambda, opts, &mut coefs, &mut residual, |_, _| {});
    Ok(LassoFit {
        code: SparseCode::from_dense(&coefs),
        converged,
        sweeps,
    })
}

/// `max_j |t_j . z|`: the smallest penalty whose solution is all zero.
pub fn lambda_max(z: &LatentVector, atoms: &AtomMatrix) -> Result<f64> {
    check_dim(atoms.dim(), z.dim())?;
    Ok(atoms
        .atoms()
        .map(|a| dot(a, z.values()).abs())
        .fold(0.0, f64::max))
}

/// Largest KKT violation of `code` for the Lasso objective; zero at an exact
/// optimum.
///
/// With `g_j = t_j . (z - T c)`: for `c_j = 0` the violation is
/// `max(|g_j| - lambda, 0)`, otherwise `|g_j - lambda sign(c_j)|`.
pub fn kkt_violation(z: &LatentVector, atoms: &AtomMatrix, lambda: f64, code: &SparseCode) -> Result<f64> {
    check_dim(atoms.dim(), z.dim())?;
    check_code(atoms, code)?;
    let recon = atoms.synthesize(code.entries().iter().copied());
    let residual: Vec<f64> = z.values().iter().zip(&recon).map(|(a, b)| a - b).collect();
    Ok(kkt_dense(atoms, lambda, &code.to_dense(), &residual))
}

/// `1/2 ‖z - T c‖² + lambda ‖c‖₁`.
pub fn objective(z: &LatentVector, atoms: &AtomMatrix, lambda: f64, code: &SparseCode) -> Result<f64> {
    check_dim(atoms.dim(), z.dim())?;
    check_code(atoms, code)?;
    let recon = atoms.synthesize(code.entries().iter().copied());
    let sq: f64 = z.values().iter().zip(&recon).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * sq + lambda * code.l1_norm())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must be finite and >= 0")));
    }
    Ok(())
}

fn check_code(atoms: &AtomMatrix, code: &SparseCode) -> Result<()> {
    if code.n_atoms() != atoms.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: atoms.n_atoms(),
            found: code.n_atoms(),
        });
    }
    Ok(())
}

pub(crate) fn atom_norms_sq(atoms: &AtomMatrix) -> Vec<f64> {
    atoms.atoms().map(|a| dot(a, a)).collect()
}

pub(crate) fn kkt_dense(atoms: &AtomMatrix, lambda: f64, coefs: &[f64], residual: &[f64]) -> f64 {
    atoms
        .atoms()
        .zip(coefs)
        .map(|(a, &c)| {
            let g = dot(a, residual);
            if c == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * c.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Runs coordinate sweeps from the warm start `coefs`, keeping
/// `residual = z - T coefs` in sync. `on_sweep` sees the state after each
/// sweep. Returns `(converged, sweeps)`.
pub(crate) fn descend(
    atoms: &AtomMatrix,
    gram_diag: &[f64],
    lambda: f64,
    opts: &SolverOptions,
    coefs: &mut [f64],
    residual: &mut [f64],
    mut on_sweep: impl FnMut(&[f64], &[f64]),
) -> (bool, usize) {
    for sweep in 1..=opts.max_iter {
        let mut max_change = 0.0f64;
        for (j, atom) in atoms.atoms().enumerate() {
            let old = coefs[j];
            let rho = dot(atom, residual) + gram_diag[j] * old;
            let new = soft_threshold(rho, lambda) / gram_diag[j];
            let delta = new - old;
            if delta != 0.0 {
                for (r, t) in residual.iter_mut().zip(atom) {
                    *r -= delta * t;
                }
                coefs[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        on_sweep(coefs, residual);
        if max_change < opts.tol && kkt_dense(atoms, lambda, coefs, residual) <= opts.tol {
            return (true, sweep);
        }
    }
    (false, opts.max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lv(v: &[f64]) -> LatentVector {
        LatentVector::new(v.to_vec()).unwrap()
    }

    fn identity(d: usize) -> AtomMatrix {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        AtomMatrix::new(d, data).unwrap()
    }

    fn random_atoms(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> AtomMatrix {
        let data: Vec<f64> = (0..dim * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        crate::Dictionary::normalized(AtomMatrix::new(dim, data).unwrap()).unwrap().into_atoms()
    }

    #[test]
    fn single_atom_matches_soft_threshold() {
        let t = AtomMatrix::new(2, vec![1.0, 0.0]).unwrap();
        let fit = lasso_cd(&lv(&[0.5, 0.0]), &t, 0.2, &SolverOptions::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.code.entries().len(), 1);
        assert_eq!(fit.code.entries()[0].0, 0);
        assert!((fit.code.entries()[0].1 - 0.3).abs() < 1e-12);

        let fit = lasso_cd(&lv(&[0.5, 0.0]), &t, 0.6, &SolverOptions::default()).unwrap();
        assert!(fit.code.is_empty());
    }

    #[test]
    fn identity_dictionary() {
        let fit = lasso_cd(&lv(&[3.0, -1.0]), &identity(2), 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(fit.code.entries(), &[(0, 2.0)]);
    }

    #[test]
    fn lambda_max_examples() {
        assert_eq!(lambda_max(&lv(&[3.0, -1.0]), &identity(2)).unwrap(), 3.0);
        assert_eq!(lambda_max(&lv(&[0.0, 0.0]), &identity(2)).unwrap(), 0.0);
        let t = AtomMatrix::from_atoms(&[vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
        assert!((lambda_max(&lv(&[0.0, 1.0]), &t).unwrap() - 0.8).abs() < 1e-15);
        assert!(lambda_max(&lv(&[0.0]), &t).is_err());
    }

    #[test]
    fn kkt_of_empty_code() {
        let t = AtomMatrix::from_atoms(&[vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
        let z = lv(&[0.3, 2.0]);
        let lmax = lambda_max(&z, &t).unwrap();
        let empty = SparseCode::empty(2);
        let v = kkt_violation(&z, &t, 0.5, &empty).unwrap();
        assert!((v - (lmax - 0.5)).abs() < 1e-12);
        assert_eq!(kkt_violation(&z, &t, lmax, &empty).unwrap(), 0.0);
        assert_eq!(kkt_violation(&z, &t, lmax + 1.0, &empty).unwrap(), 0.0);
    }

    #[test]
    fn tight_tolerance_meets_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_atoms(&mut rng, 24, 12);
        let z = lv(&(0..24).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>());
        let opts = SolverOptions {
            tol: 1e-8,
            max_iter: 10_000,
        };
        let fit = lasso_cd(&z, &t, 0.3, &opts).unwrap();
        assert!(fit.converged);
        assert!(kkt_violation(&z, &t, 0.3, &fit.code).unwrap() <= 1e-6);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_atoms(&mut rng, 8, 16);
        let z = lv(&(0..8).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>());
        let fit = lasso_cd(&z, &t, 0.01, &SolverOptions { tol: 1e-12, max_iter: 1 }).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.sweeps, 1);
        assert!(!fit.code.is_empty());
    }

    #[test]
    fn input_validation() {
        let t = identity(2);
        assert!(lasso_cd(&lv(&[1.0]), &t, 0.1, &SolverOptions::default()).is_err());
        assert!(lasso_cd(&lv(&[1.0, 0.0]), &t, -0.1, &SolverOptions::default()).is_err());
        assert!(lasso_cd(&lv(&[1.0, 0.0]), &t, 0.1, &SolverOptions { tol: 0.0, max_iter: 1 }).is_err());
        assert!(SparseCode::new(2, vec![(1, 1.0), (0, 1.0)]).is_err());
        assert!(SparseCode::new(2, vec![(2, 1.0)]).is_err());
        assert!(SparseCode::new(2, vec![(0, 0.0)]).is_err());
    }

    #[test]
    fn objective_decreases_every_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let t = random_atoms(&mut rng, 16, 24);
            let z: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
            let lambda = rng.random_range(0.0..1.0);
            let mut coefs = vec![0.0; 24];
            let mut residual = z.clone();
            let mut history = vec![0.5 * dot(&z, &z)];
            descend(
                &t,
                &atom_norms_sq(&t),
                lambda,
                &SolverOptions { tol: 1e-10, max_iter: 500 },
                &mut coefs,
                &mut residual,
                |c, r| history.push(0.5 * dot(r, r) + lambda * c.iter().map(|x| x.abs()).sum::<f64>()),
            );
            for w in history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_atoms(&mut rng, 32, 16);
        let z = lv(&(0..32).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>());
        let a = lasso_cd(&z, &t, 0.2, &SolverOptions::default()).unwrap();
        let b = lasso_cd(&z, &t, 0.2, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn orthonormal_matches_closed_form(
            z in proptest::collection::vec(-10.0f64..10.0, 1..12),
            lambda in 0.0f64..3.0,
        ) {
            let t = identity(z.len());
            let fit = lasso_cd(&lv(&z), &t, lambda, &SolverOptions::default()).unwrap();
            let dense = fit.code.to_dense();
            for (c, x) in dense.iter().zip(&z) {
                let expected = x.signum() * (x.abs() - lambda).max(0.0);
                prop_assert!((c - expected).abs() <= 1e-8);
            }
        }

        #[test]
        fn support_shrinks_with_lambda(seed in 0u64..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_atoms(&mut rng, 16, 8);
            let z = lv(&(0..16).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>());
            let lmax = lambda_max(&z, &t).unwrap();
            let grid = [0.0, 0.25, 0.5, 1.0].map(|f| f * lmax);
            let sizes: Vec<usize> = grid
                .iter()
                .map(|&l| lasso_cd(&z, &t, l, &SolverOptions::default()).unwrap().code.len())
                .collect();
            prop_assert_eq!(*sizes.last().unwrap(), 0);
            prop_assert!(sizes[0] >= sizes[2]);
        }
    }
}
