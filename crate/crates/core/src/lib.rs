//! Distinctive-feature speech tokenization.
//!
//! The pipeline has two learned stages. A small convolutional boundary
//! detector is trained contrastively on raw audio and marks frames where
//! the acoustic content changes sharply. The codec then encodes audio to a
//! latent sequence, cuts it at those boundaries, squeezes each
//! variable-length segment into one vector, and quantizes that vector with
//! group-wise scalar quantization into a single composite token.
//!
//! Modules:
//!
//! - [`audio`]: WAV I/O, resampling, STFT and log-mel spectrograms.
//! - [`ndgrad`]: dense tensors with reverse-mode autodiff and Adam.
//! - [`detector`]: boundary detector, contrastive training, peak picking.
//! - [`segmenter`]: partitioning and per-segment compress/expand.
//! - [`quant`]: FSQ, GSQ (many-to-one, many-to-many), VQ, composite tokens.
//! - [`codec`]: end-to-end model, losses, training and the `.dtok` format.
//! - [`evalkit`]: metrics (mel error, STFT distance, STOI, TKR, BPS) and
//!   codebook / cluster analyses.
//! - [`config`]: flat `section.key = value` run configuration.
//! - [`corpus`]: manifests and synthetic tone corpora.

pub mod audio;
pub mod codec;
pub mod config;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod evalkit;
pub mod ndgrad;
pub mod quant;
pub mod segmenter;

pub use error::{Error, Result};
