//! Multi-item semantic compression of latent embedding collections.
//!
//! A collection of embeddings is summarised by a learned dictionary of
//! unit-norm atoms. Each item is then coded as a short list of quantized
//! `(atom index, coefficient)` tuples against the quantized dictionary, and
//! decoded by linear reconstruction followed by renormalization.
//!
//! The crate is organised along the pipeline:
//!
//! * [`embedding_store`] - latent vectors, collections and the SMEB file format
//! * [`semantic_ops`] - latent arithmetic (combine, renormalize, cosine)
//! * [`sparse_coder`] - Lasso coordinate descent and optimality diagnostics
//! * [`dictionary`] and [`dict_learner`] - atoms and alternating dictionary learning
//! * [`quantizer`] - symmetric uniform scalar quantization
//! * [`bitstream`] - SMDC / SMCD containers with exact rate accounting
//! * [`rate_model`] - closed-form rate model, break-even size, compression ratios
//! * [`rd_optimizer`] - parameter sweeps, presets and upper convex hull
//! * [`codec`] - end-to-end encode / decode / analysis

pub mod bitstream;
pub mod codec;
pub mod dict_learner;
pub mod dictionary;
pub mod embedding_store;
mod error;
mod wire;
pub mod quantizer;
pub mod rate_model;
pub mod rd_optimizer;
pub mod semantic_ops;
pub mod sparse_coder;

pub use error::{Error, Result};

pub use bitstream::{RateReport, SMCD_HEADER_BYTES, SMDC_HEADER_BYTES};
pub use codec::{build_side_info, decode_item, encode_item, project_residual, FidelityReport};
pub use dict_learner::{learn_dictionary, LearnOptions};
pub use dictionary::{AtomMatrix, Dictionary};
pub use embedding_store::{EmbeddingCollection, LatentVector};
pub use quantizer::{QuantizedCode, QuantizedDictionary};
pub use rate_model::CodecParams;
pub use rd_optimizer::{Preset, RateKind, RatePoint};
pub use sparse_coder::{lasso_cd, SolverOptions, SparseCode};

/// Norm every decoded latent is rescaled to before it leaves the codec.
pub const DEFAULT_TARGET_NORM: f64 = 20.0;
