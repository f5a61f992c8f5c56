//! Symmetric mid-tread uniform quantization with one max-abs scale per block.
//!
//! For `bits >= 2` the grid is `{-q, ..., q} * scale` with
//! `q = 2^(bits-1) - 1` and `scale = maxabs / q`. One bit keeps only the sign:
//! levels are `±1` and `scale = maxabs`.
//!
//! Atoms are quantized one scale per atom, codes one scale per item.

use crate::dictionary::{AtomMatrix, Dictionary};
use crate::sparse_coder::SparseCode;
use crate::{Error, Result};

pub const MIN_BITS: u8 = 1;
pub const MAX_BITS: u8 = 16;

/// Largest level magnitude representable with `bits`.
pub fn max_level(bits: u8) -> i32 {
    if bits <= 1 {
        1
    } else {
        (1 << (bits - 1)) - 1
    }
}

pub fn check_bits(bits: u8) -> Result<()> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "bit depth {bits} outside {MIN_BITS}..={MAX_BITS}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub levels: Vec<i32>,
    pub scale: f32,
}

/// Quantizes `values` on a symmetric grid scaled to their max-abs value.
///
/// The scale is rounded to `f32` before the levels are computed, so the
/// levels are exactly those a decoder holding the stored scale would expect.
pub fn quantize_uniform(values: &[f64], bits: u8) -> Result<Quantized> {
    check_bits(bits)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantizer input"));
    }
    let maxabs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let qmax = max_level(bits);
    let scale = (maxabs / qmax as f64) as f32;
    if maxabs == 0.0 || scale == 0.0 {
        return Ok(Quantized {
            levels: vec![0; values.len()],
            scale: 0.0,
        });
    }
    let levels = if bits == 1 {
        values.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect()
    } else {
        let s = scale as f64;
        values
            .iter()
            .map(|&v| ((v / s).round() as i64).clamp(-(qmax as i64), qmax as i64) as i32)
            .collect()
    };
    Ok(Quantized { levels, scale })
}

pub fn dequantize(levels: &[i32], scale: f32) -> Vec<f64> {
    let s = scale as f64;
    levels.iter().map(|&l| l as f64 * s).collect()
}

fn check_level(level: i32, bits: u8) -> Result<()> {
    let q = max_level(bits);
    if bits == 1 && level == 0 || level.abs() > q {
        return Err(Error::Format(format!("level {level} not representable with {bits} bits")));
    }
    Ok(())
}

/// Quantized side information: `n_atoms` atoms of `dim` levels, one scale
/// per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDictionary {
    dim: usize,
    bits: u8,
    scales: Vec<f32>,
    levels: Vec<i32>,
    lambda_train: f32,
}

impl QuantizedDictionary {
    pub fn new(dim: usize, bits: u8, scales: Vec<f32>, levels: Vec<i32>, lambda_train: f32) -> Result<Self> {
        check_bits(bits)?;
        if dim == 0 || scales.is_empty() {
            return Err(Error::InvalidParameter("quantized dictionary must have atoms".into()));
        }
        if levels.len() != dim * scales.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * scales.len(),
                found: levels.len(),
            });
        }
        if !lambda_train.is_finite() {
            return Err(Error::NonFinite("training lambda"));
        }
        for (j, (&s, atom)) in scales.iter().zip(levels.chunks_exact(dim)).enumerate() {
            if !(s.is_finite() && s > 0.0) || atom.iter().all(|&l| l == 0) {
                return Err(Error::ZeroAtom(j));
            }
            for &l in atom {
                check_level(l, bits)?;
            }
        }
        Ok(Self {
            dim,
            bits,
            scales,
            levels,
            lambda_train,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_atoms(&self) -> usize {
        self.scales.len()
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    pub fn levels(&self) -> &[i32] {
        &self.levels
    }

    pub fn atom_levels(&self, j: usize) -> &[i32] {
        &self.levels[j * self.dim..(j + 1) * self.dim]
    }

    /// Penalty the dictionary was learned with; informational only.
    pub fn lambda_train(&self) -> f32 {
        self.lambda_train
    }

    pub fn with_lambda_train(mut self, lambda: f32) -> Self {
        self.lambda_train = lambda;
        self
    }

    /// Atoms as the decoder sees them (`level * scale`).
    pub fn dequantize(&self) -> AtomMatrix {
        let data = self
            .levels
            .chunks_exact(self.dim)
            .zip(&self.scales)
            .flat_map(|(atom, &s)| dequantize(atom, s))
            .collect();
        AtomMatrix::new(self.dim, data).expect("validated on construction")
    }
}

pub fn quantize_dictionary(dict: &Dictionary, bits: u8) -> Result<QuantizedDictionary> {
    check_bits(bits)?;
    let mut scales = Vec::with_capacity(dict.n_atoms());
    let mut levels = Vec::with_capacity(dict.as_flat().len());
    for (j, atom) in dict.atoms().enumerate() {
        let q = quantize_uniform(atom, bits)?;
        if q.scale == 0.0 {
            return Err(Error::ZeroAtom(j));
        }
        scales.push(q.scale);
        levels.extend(q.levels);
    }
    QuantizedDictionary::new(dict.dim(), bits, scales, levels, 0.0)
}

/// Quantized coefficients of one item. Entries have strictly increasing atom
/// indices and non-zero levels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCode {
    n_atoms: usize,
    bits: u8,
    scale: f32,
    entries: Vec<(usize, i32)>,
}

impl QuantizedCode {
    pub fn new(n_atoms: usize, bits: u8, scale: f32, entries: Vec<(usize, i32)>) -> Result<Self> {
        check_bits(bits)?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::Format(format!("invalid code scale {scale}")));
        }
        if scale == 0.0 && !entries.is_empty() {
            return Err(Error::Format("non-empty code with zero scale".into()));
        }
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Format("code indices must be strictly increasing".into()));
            }
        }
        for &(j, l) in &entries {
            if j >= n_atoms {
                return Err(Error::IndexOutOfRange {
                    index: j as u64,
                    len: n_atoms as u64,
                });
            }
            if l == 0 {
                return Err(Error::Format(format!("zero level stored for atom {j}")));
            }
            check_level(l, bits)?;
        }
        Ok(Self {
            n_atoms,
            bits,
            scale,
            entries,
        })
    }

    pub fn empty(n_atoms: usize, bits: u8) -> Result<Self> {
        Self::new(n_atoms, bits, 0.0, Vec::new())
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn entries(&self) -> &[(usize, i32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dequantized coefficients as `(atom, level * scale)` pairs.
    pub fn coefficients(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let s = self.scale as f64;
        self.entries.iter().map(move |&(j, l)| (j, l as f64 * s))
    }

    pub fn to_sparse(&self) -> SparseCode {
        SparseCode::new(self.n_atoms, self.coefficients().collect()).expect("levels are non-zero")
    }
}

pub fn quantize_code(code: &SparseCode, bits: u8) -> Result<QuantizedCode> {
    check_bits(bits)?;
    let values: Vec<f64> = code.entries().iter().map(|&(_, c)| c).collect();
    let q = quantize_uniform(&values, bits)?;
    let entries: Vec<(usize, i32)> = code
        .entries()
        .iter()
        .zip(&q.levels)
        .filter(|(_, &l)| l != 0)
        .map(|(&(j, _), &l)| (j, l))
        .collect();
    let scale = if entries.is_empty() { 0.0 } else { q.scale };
    QuantizedCode::new(code.n_atoms(), bits, scale, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_store::norm;
    use proptest::prelude::*;

    #[test]
    fn two_bit_grid() {
        let q = quantize_uniform(&[-1.0, 0.5, 1.0], 2).unwrap();
        assert_eq!(q.scale, 1.0);
        assert_eq!(q.levels, vec![-1, 1, 1]);
        assert_eq!(dequantize(&q.levels, q.scale), vec![-1.0, 1.0, 1.0]);
    }

    #[test]
    fn all_zero_input() {
        for bits in [1, 2, 8, 16] {
            let q = quantize_uniform(&[0.0; 5], bits).unwrap();
            assert_eq!(q.scale, 0.0);
            assert_eq!(q.levels, vec![0; 5]);
            assert_eq!(dequantize(&q.levels, q.scale), vec![0.0; 5]);
        }
    }

    #[test]
    fn one_bit_keeps_sign() {
        let q = quantize_uniform(&[-0.5, 0.0, 2.0], 1).unwrap();
        assert_eq!(q.scale, 2.0);
        assert_eq!(q.levels, vec![-1, 1, 1]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(quantize_uniform(&[1.0], 0).is_err());
        assert!(quantize_uniform(&[1.0], 17).is_err());
        assert!(quantize_uniform(&[f64::NAN], 4).is_err());
    }

    #[test]
    fn sixteen_bit_half_step() {
        let values: Vec<f64> = (0..100).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let maxabs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let q = quantize_uniform(&values, 16).unwrap();
        let back = dequantize(&q.levels, q.scale);
        let bound = maxabs / (2.0 * 32767.0);
        for (v, b) in values.iter().zip(&back) {
            assert!((v - b).abs() <= bound * (1.0 + 1e-6));
        }
    }

    #[test]
    fn code_quantization_drops_zero_levels() {
        let code = SparseCode::new(8, vec![(3, 0.05), (7, 2.0)]).unwrap();
        let q = quantize_code(&code, 2).unwrap();
        assert_eq!(q.scale(), 2.0);
        assert_eq!(q.entries(), &[(7, 1)]);

        let q = quantize_code(&SparseCode::empty(8), 4).unwrap();
        assert!(q.is_empty());
        assert_eq!(q.scale(), 0.0);
    }

    #[test]
    fn unit_atom_at_16_bits() {
        let d = 768;
        let raw: Vec<f64> = (0..d).map(|i| ((i as f64) * 0.37).sin()).collect();
        let dict = Dictionary::normalized(AtomMatrix::new(d, raw).unwrap()).unwrap();
        let qd = quantize_dictionary(&dict, 16).unwrap();
        let deq = qd.dequantize();
        let err: Vec<f64> = dict.atom(0).iter().zip(deq.atom(0)).map(|(a, b)| a - b).collect();
        assert!(norm(&err) < 1e-4);
    }

    #[test]
    fn construction_guards() {
        assert!(matches!(
            QuantizedDictionary::new(2, 4, vec![0.0], vec![1, 0], 0.0),
            Err(Error::ZeroAtom(0))
        ));
        assert!(QuantizedDictionary::new(2, 2, vec![1.0], vec![2, 0], 0.0).is_err());
        assert!(QuantizedDictionary::new(2, 1, vec![1.0], vec![1, 0], 0.0).is_err());
        assert!(QuantizedCode::new(4, 4, 1.0, vec![(1, 0)]).is_err());
        assert!(QuantizedCode::new(4, 4, 0.0, vec![(1, 1)]).is_err());
        assert!(QuantizedCode::new(4, 4, 1.0, vec![(4, 1)]).is_err());
    }

    fn block() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-50.0f64..50.0, 1..64)
    }

    proptest! {
        #[test]
        fn half_step_bound(values in block(), bits in 2u8..=16) {
            let q = quantize_uniform(&values, bits).unwrap();
            let back = dequantize(&q.levels, q.scale);
            for (v, b) in values.iter().zip(&back) {
                prop_assert!((v - b).abs() <= q.scale as f64 / 2.0 * (1.0 + 1e-6));
            }
        }

        #[test]
        fn requantization_is_stable(values in block(), bits in 1u8..=16) {
            let q = quantize_uniform(&values, bits).unwrap();
            let again = quantize_uniform(&dequantize(&q.levels, q.scale), bits).unwrap();
            prop_assert_eq!(again, q);
        }

        #[test]
        fn dropping_zero_levels_preserves_reconstruction(
            coefs in proptest::collection::vec(-20.0f64..20.0, 1..32),
            bits in 1u8..=8,
        ) {
            let code = SparseCode::from_dense(&coefs);
            let q = quantize_code(&code, bits).unwrap();
            let full = quantize_uniform(&code.entries().iter().map(|e| e.1).collect::<Vec<_>>(), bits).unwrap();
            let mut dense_full = vec![0.0; coefs.len()];
            for ((j, _), l) in code.entries().iter().zip(&full.levels) {
                dense_full[*j] = *l as f64 * full.scale as f64;
            }
            prop_assert_eq!(q.to_sparse().to_dense(), dense_full);
        }
    }
}
