//! Per-instance PCA compression of downlink CSI for massive-MIMO feedback.
//!
//! The crate covers the whole chain a UE-side compressor and gNB-side
//! reconstructor need:
//!
//! - [`chanforge`]: seeded tapped-delay-line channel generation and the
//!   `CFR1` dataset file format.
//! - [`xforms`]: angular-delay (2D unitary DFT) and sub-band eigenvector
//!   representations of a channel frequency response.
//! - [`pca`]: per-instance truncated-SVD bases, compression and inverse PCA.
//! - [`quant`]: symmetric uniform scalar quantization of report payloads.
//! - [`metrics`]: generalized cosine similarity, overhead reduction and
//!   feedback-bit budgets.
//! - [`bench`]: config-driven experiment runner emitting CSV/markdown tables.

pub mod bench;
pub mod chanforge;
pub mod codec;
mod error;
pub mod metrics;
pub mod pca;
pub mod quant;
pub mod xforms;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix, row-major.
pub type CMatrix = ndarray::Array2<C64>;
