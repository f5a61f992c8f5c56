//! Closed-form rate model for a dictionary-coded collection.
//!
//! ```text
//! R(dict)       = n_a * D * b_dict
//! P(non-null)   = (lambda + 1)^(-log2 n_a)
//! R(item)       = log2(n_a) * b_coef * P(non-null)
//! R_total(N)    = R(dict) + N * R(item)
//! ```
//!
//! The model counts neither index bits nor per-item overhead; the exact
//! figures come from [`crate::bitstream::RateReport`].

use std::fmt;
use std::str::FromStr;

use crate::quantizer::check_bits;
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 768;
/// 768 x 768 images.
pub const DEFAULT_IMAGE_PIXELS: u64 = 768 * 768;
/// Single-item CLIP baseline the break-even figures are measured against.
pub const DEFAULT_SIC_BPP: f64 = 1.2e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecParams {
    pub n_atoms: usize,
    pub lambda: f64,
    pub b_dict: u8,
    pub b_coef: u8,
    pub dim: usize,
    pub image_pixels: u64,
}

impl CodecParams {
    pub fn new(n_atoms: usize, lambda: f64, b_dict: u8, b_coef: u8) -> Result<Self> {
        let p = Self {
            n_atoms,
            lambda,
            b_dict,
            b_coef,
            dim: DEFAULT_DIM,
            image_pixels: DEFAULT_IMAGE_PIXELS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        self.dim = dim;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pixels(mut self, pixels: u64) -> Result<Self> {
        self.image_pixels = pixels;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 2 {
            return Err(Error::InvalidParameter(format!("n_atoms {} must be >= 2", self.n_atoms)));
        }
        if self.n_atoms > crate::dictionary::MAX_ATOMS {
            return Err(Error::InvalidParameter(format!("n_atoms {} exceeds the cap", self.n_atoms)));
        }
        crate::sparse_coder::check_lambda(self.lambda)?;
        check_bits(self.b_dict)?;
        check_bits(self.b_coef)?;
        if self.dim == 0 || self.image_pixels == 0 {
            return Err(Error::InvalidParameter("dimension and pixel count must be positive".into()));
        }
        Ok(())
    }
}

impl fmt::Display for CodecParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_a={} lambda={} b_dict={} b_coef={}",
            self.n_atoms, self.lambda, self.b_dict, self.b_coef
        )
    }
}

/// Number of items sharing one dictionary; `Infinite` drops the dictionary
/// term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CollectionSize {
    Items(u64),
    Infinite,
}

impl CollectionSize {
    pub fn items(self) -> Option<u64> {
        match self {
            CollectionSize::Items(n) => Some(n),
            CollectionSize::Infinite => None,
        }
    }
}

impl fmt::Display for CollectionSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollectionSize::Items(n) => write!(f, "{n}"),
            CollectionSize::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for CollectionSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(CollectionSize::Infinite);
        }
        match s.parse::<u64>() {
            Ok(n) if n > 0 => Ok(CollectionSize::Items(n)),
            _ => Err(Error::InvalidParameter(format!("collection size {s:?} is not a positive integer or inf"))),
        }
    }
}

/// Modeled fraction of non-null coefficients.
pub fn p_nonnull_model(lambda: f64, n_atoms: usize) -> f64 {
    (lambda + 1.0).powf(-(n_atoms as f64).log2())
}

pub fn dict_bits_model(p: &CodecParams) -> f64 {
    p.n_atoms as f64 * p.dim as f64 * p.b_dict as f64
}

pub fn rate_per_item_model(p: &CodecParams) -> f64 {
    (p.n_atoms as f64).log2() * p.b_coef as f64 * p_nonnull_model(p.lambda, p.n_atoms)
}

pub fn rate_total_model(p: &CodecParams, n: u64) -> f64 {
    dict_bits_model(p) + n as f64 * rate_per_item_model(p)
}

/// Model bits per item once the dictionary is shared by `n` items.
pub fn rate_per_item_amortized(p: &CodecParams, n: CollectionSize) -> f64 {
    match n {
        CollectionSize::Items(n) => rate_total_model(p, n) / n as f64,
        CollectionSize::Infinite => rate_per_item_model(p),
    }
}

pub fn bits_to_bpp(bits_per_item: f64, pixels: u64) -> f64 {
    bits_per_item / pixels as f64
}

pub fn bpp_to_bits(bpp: f64, pixels: u64) -> f64 {
    bpp * pixels as f64
}

/// Smallest collection size for which the shared dictionary plus per-item
/// codes cost fewer bits than coding every item on its own at
/// `sic_bits_per_item`.
pub fn break_even_n(dict_bits: f64, sic_bits_per_item: f64, smic_bits_per_item: f64) -> Result<u64> {
    if sic_bits_per_item.partial_cmp(&smic_bits_per_item) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::NoBreakEven);
    }
    let ratio = dict_bits / (sic_bits_per_item - smic_bits_per_item);
    Ok(ratio.floor() as u64 + 1)
}

/// `N * R(SIC) / (R(dict) + N * R(item))`.
pub fn compression_ratio(sic_bits_per_item: f64, p: &CodecParams, n: CollectionSize) -> f64 {
    match n {
        CollectionSize::Items(n) => n as f64 * sic_bits_per_item / rate_total_model(p, n),
        CollectionSize::Infinite => sic_bits_per_item / rate_per_item_model(p),
    }
}
