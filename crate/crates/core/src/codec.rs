//! End-to-end coding of a collection against quantized side information.
//!
//! Encoding solves the Lasso against the *dequantized* atoms and quantizes
//! the coefficients; decoding rebuilds `sum level * scale * atom` from the
//! same dequantized atoms and rescales to the target norm. The float
//! dictionary never enters the coding path.

use rayon::prelude::*;

use crate::bitstream;
use crate::dict_learner::{learn_dictionary, LearnOptions};
use crate::dictionary::AtomMatrix;
use crate::embedding_store::{check_dim, norm, EmbeddingCollection, LatentVector};
use crate::quantizer::{check_bits, quantize_code, quantize_dictionary, QuantizedCode, QuantizedDictionary};
use crate::rate_model::CodecParams;
use crate::semantic_ops::{self, DEGENERATE_NORM};
use crate::sparse_coder::{lasso_cd, SolverOptions};
use crate::{Error, Result};

/// Projection or residual norms at or below this fraction of `‖z‖` are
/// treated as degenerate by [`project_residual`].
pub const DEGENERATE_COMPONENT: f64 = 1e-6;

/// Learns the dictionary for `p` on `z` and quantizes it to `p.b_dict` bits.
pub fn build_side_info(z: &EmbeddingCollection, p: &CodecParams, seed: u64) -> Result<QuantizedDictionary> {
    build_side_info_with(z, p, &LearnOptions::default().with_seed(seed))
}

pub fn build_side_info_with(z: &EmbeddingCollection, p: &CodecParams, opts: &LearnOptions) -> Result<QuantizedDictionary> {
    p.validate()?;
    check_dim(p.dim, z.dim())?;
    let dict = learn_dictionary(z, p.n_atoms, p.lambda, opts)?;
    Ok(quantize_dictionary(&dict, p.b_dict)?.with_lambda_train(p.lambda as f32))
}

/// Quantized dictionary together with its dequantized atoms and identifier.
#[derive(Debug, Clone)]
pub struct Codec {
    side_info: QuantizedDictionary,
    atoms: AtomMatrix,
    dict_id: u64,
    solver: SolverOptions,
}

impl Codec {
    pub fn new(side_info: QuantizedDictionary) -> Self {
        let atoms = side_info.dequantize();
        let dict_id = bitstream::dict_id(&side_info);
        Self {
            side_info,
            atoms,
            dict_id,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn side_info(&self) -> &QuantizedDictionary {
        &self.side_info
    }

    pub fn atoms(&self) -> &AtomMatrix {
        &self.atoms
    }

    pub fn dict_id(&self) -> u64 {
        self.dict_id
    }

    pub fn encode(&self, z: &LatentVector, lambda: f64, b_coef: u8) -> Result<QuantizedCode> {
        check_bits(b_coef)?;
        let fit = lasso_cd(z, &self.atoms, lambda, &self.solver)?;
        if !fit.converged {
            log::warn!("coordinate descent stopped after {} sweeps without converging", fit.sweeps);
        }
        quantize_code(&fit.code, b_coef)
    }

    /// Encodes every item; the output order matches the input.
    pub fn encode_all(&self, z: &EmbeddingCollection, lambda: f64, b_coef: u8) -> Result<Vec<QuantizedCode>> {
        check_dim(self.atoms.dim(), z.dim())?;
        (0..z.len())
            .into_par_iter()
            .map(|i| self.encode(&z.item(i)?, lambda, b_coef))
            .collect()
    }

    pub fn decode(&self, code: &QuantizedCode, target_norm: f64) -> Result<LatentVector> {
        if code.n_atoms() != self.atoms.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: self.atoms.n_atoms(),
                found: code.n_atoms(),
            });
        }
        if code.is_empty() {
            return Err(Error::NullCode);
        }
        let recon = self.atoms.synthesize(code.coefficients());
        let values = semantic_ops::rescaled(&recon, target_norm).map_err(|e| match e {
            Error::ZeroVector => Error::NullCode,
            other => other,
        })?;
        LatentVector::new(values)
    }

    /// Decodes every code, failing on the first null code.
    pub fn decode_all(&self, codes: &[QuantizedCode], target_norm: f64) -> Result<EmbeddingCollection> {
        let decoded: Vec<LatentVector> = codes
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                self.decode(c, target_norm).map_err(|e| match e {
                    Error::NullCode => Error::NullCodeAt(i),
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        EmbeddingCollection::from_vectors(self.atoms.dim(), &decoded)
    }

    /// Decodes every code; null codes become zero rows. Returns the
    /// collection and the number of null codes.
    pub fn decode_all_lossy(&self, codes: &[QuantizedCode], target_norm: f64) -> Result<(EmbeddingCollection, usize)> {
        let dim = self.atoms.dim();
        let decoded: Vec<Option<LatentVector>> = codes
            .par_iter()
            .map(|c| match self.decode(c, target_norm) {
                Ok(v) => Ok(Some(v)),
                Err(Error::NullCode) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        let nulls = decoded.iter().filter(|d| d.is_none()).count();
        let zero = LatentVector::zeros(dim)?;
        let out = EmbeddingCollection::from_vectors(dim, decoded.iter().map(|d| d.as_ref().unwrap_or(&zero)))?;
        Ok((out, nulls))
    }

    /// Splits `z` into its projection on the dictionary span and the
    /// remainder, both rescaled to `target_norm`. Analysis only: the
    /// projection uses unquantized Lasso coefficients.
    pub fn project_residual(&self, z: &LatentVector, lambda: f64, target_norm: f64) -> Result<(LatentVector, LatentVector)> {
        let fit = lasso_cd(z, &self.atoms, lambda, &self.solver)?;
        let proj = self.atoms.synthesize(fit.code.entries().iter().copied());
        let resid: Vec<f64> = z.values().iter().zip(&proj).map(|(a, b)| a - b).collect();
        let floor = (DEGENERATE_COMPONENT * z.norm()).max(DEGENERATE_NORM);
        if norm(&proj) <= floor {
            return Err(Error::DegenerateProjection);
        }
        if norm(&resid) <= floor {
            return Err(Error::DegenerateResidual);
        }
        Ok((
            LatentVector::new(semantic_ops::rescaled(&proj, target_norm)?)?,
            LatentVector::new(semantic_ops::rescaled(&resid, target_norm)?)?,
        ))
    }
}

pub fn encode_item(z: &LatentVector, qd: &QuantizedDictionary, lambda: f64, b_coef: u8) -> Result<QuantizedCode> {
    check_dim(qd.dim(), z.dim())?;
    Codec::new(qd.clone()).encode(z, lambda, b_coef)
}

pub fn decode_item(code: &QuantizedCode, qd: &QuantizedDictionary, target_norm: f64) -> Result<LatentVector> {
    Codec::new(qd.clone()).decode(code, target_norm)
}

pub fn project_residual(
    z: &LatentVector,
    qd: &QuantizedDictionary,
    lambda: f64,
    target_norm: f64,
) -> Result<(LatentVector, LatentVector)> {
    check_dim(qd.dim(), z.dim())?;
    Codec::new(qd.clone()).project_residual(z, lambda, target_norm)
}

/// Latent-space fidelity of a decoded collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityReport {
    pub items: usize,
    pub mean_cosine: f64,
    pub min_cosine: f64,
    /// Mean squared error per coordinate after rescaling both sides to the
    /// target norm.
    pub mean_mse: f64,
    /// Rows where either side is a zero vector; they count as cosine 0.
    pub degenerate: usize,
}

pub fn fidelity_report(z: &EmbeddingCollection, zhat: &EmbeddingCollection, target_norm: f64) -> Result<FidelityReport> {
    check_dim(z.dim(), zhat.dim())?;
    if z.len() != zhat.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: zhat.len(),
        });
    }
    if z.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let dim = z.dim() as f64;
    let mut sum_cos = 0.0;
    let mut min_cos = f64::INFINITY;
    let mut sum_mse = 0.0;
    let mut degenerate = 0;
    for (a, b) in z.items().zip(zhat.items()) {
        let na = semantic_ops::rescaled(a.values(), target_norm).unwrap_or_else(|_| vec![0.0; a.dim()]);
        let nb = semantic_ops::rescaled(b.values(), target_norm).unwrap_or_else(|_| vec![0.0; b.dim()]);
        let cos = match semantic_ops::cosine(&a, &b) {
            Ok(c) => c,
            Err(Error::ZeroVector) => {
                degenerate += 1;
                0.0
            }
            Err(e) => return Err(e),
        };
        sum_cos += cos;
        min_cos = min_cos.min(cos);
        sum_mse += na.iter().zip(&nb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / dim;
    }
    let n = z.len() as f64;
    Ok(FidelityReport {
        items: z.len(),
        mean_cosine: sum_cos / n,
        min_cosine: min_cos,
        mean_mse: sum_mse / n,
        degenerate,
    })
}
