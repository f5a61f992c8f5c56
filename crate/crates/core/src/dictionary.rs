//! Atom storage. [`AtomMatrix`] holds any set of non-zero atoms (for example
//! the dequantized side information); [`Dictionary`] adds the unit-norm
//! invariant the learner maintains.

use std::ops::Deref;

use crate::embedding_store::{check_dim, dot, norm};
use crate::{Error, Result};

/// Tolerance on `|‖t_j‖ - 1|` for dictionary atoms.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Upper bound on atom counts accepted by the learner and the containers.
pub const MAX_ATOMS: usize = 4096;

/// `n_atoms` atoms of dimension `dim`, stored atom-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl AtomMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("atom dimension must be >= 1".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form a whole number of {dim}-dimensional atoms",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("atoms"));
        }
        let m = Self { dim, data };
        if let Some(j) = (0..m.n_atoms()).find(|&j| norm(m.atom(j)) == 0.0) {
            return Err(Error::ZeroAtom(j));
        }
        Ok(m)
    }

    pub fn from_atoms(atoms: &[Vec<f64>]) -> Result<Self> {
        let dim = atoms.first().map(Vec::len).unwrap_or(0);
        for a in atoms {
            check_dim(dim, a.len())?;
        }
        Self::new(dim, atoms.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_atoms(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// `T^T z`.
    pub fn correlations(&self, z: &[f64]) -> Vec<f64> {
        self.atoms().map(|a| dot(a, z)).collect()
    }

    /// `sum_j c_j t_j` for a sparse coefficient list.
    pub fn synthesize(&self, entries: impl IntoIterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, c) in entries {
            for (o, t) in out.iter_mut().zip(self.atom(j)) {
                *o += c * t;
            }
        }
        out
    }

    pub(crate) fn atom_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }
}

/// Learned dictionary: every atom has unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: AtomMatrix,
}

impl Dictionary {
    pub fn new(atoms: AtomMatrix) -> Result<Self> {
        for (j, a) in atoms.atoms().enumerate() {
            let n = norm(a);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidParameter(format!("atom {j} has norm {n}, expected 1")));
            }
        }
        Ok(Self { atoms })
    }

    /// Normalizes every atom to unit length.
    pub fn normalized(mut atoms: AtomMatrix) -> Result<Self> {
        for j in 0..atoms.n_atoms() {
            let a = atoms.atom_mut(j);
            let n = norm(a);
            a.iter_mut().for_each(|x| *x /= n);
        }
        Self::new(atoms)
    }

    pub fn as_atoms(&self) -> &AtomMatrix {
        &self.atoms
    }

    pub fn into_atoms(self) -> AtomMatrix {
        self.atoms
    }
}

impl Deref for Dictionary {
    type Target = AtomMatrix;

    fn deref(&self) -> &AtomMatrix {
        &self.atoms
    }
}

impl AsRef<AtomMatrix> for Dictionary {
    fn as_ref(&self) -> &AtomMatrix {
        &self.atoms
    }
}

impl AsRef<AtomMatrix> for AtomMatrix {
    fn as_ref(&self) -> &AtomMatrix {
        self
    }
}
