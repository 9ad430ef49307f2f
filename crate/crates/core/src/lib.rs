//! Text-independent speaker identification toolkit.
//!
//! The crate covers the whole analysis chain and a comparative benchmark on
//! top of it:
//!
//! * [`audio`]: PCM16 WAV input/output, framing and the Hamming window.
//! * [`preprocessing`]: Gaussian silence model and endpoint detection.
//! * [`features`]: MFCC, LPCC and PLP short-term cepstral features.
//! * [`reduce`]: PCA and Gaussian-kernel stochastic neighbour embedding.
//! * [`classify`]: weighted k-NN, CART, bagged trees, SVM and a two-hidden-layer
//!   feed-forward network.
//! * [`bench`]: synthetic corpus generation, the extractor x reducer x
//!   classifier sweep, speaker-count curves and ROC data.
//!
//! Matrices are `ndarray::Array2<f64>` with one observation per row.

pub mod audio;
pub mod bench;
pub mod classify;
mod error;
pub mod features;
pub mod interchange;
pub mod preprocessing;
pub mod reduce;
mod seed;

pub use error::{Error, Result};
pub use seed::derive_seed;
