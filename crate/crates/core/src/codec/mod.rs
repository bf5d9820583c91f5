//! Waveform codec: convolutional encoder, boundary-driven segment
//! compression, group scalar quantization and a mirrored decoder.

mod loss;
mod model;
mod stream;
mod train;

pub use loss::{LossTarget, LossTerms, MelTerm, ReconstructionLoss};
pub use model::{map_boundaries, Codec};
pub use stream::{write_varint, Record, StreamHeader, TokenStream, STREAM_MAGIC, STREAM_VERSION};
pub use train::{train_codec, CodecTrainConfig, TrainedCodec};

use crate::error::{Error, Result};
use crate::quant::{QuantizerSpec, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub sample_rate: u32,
    /// Encoder downsampling factors; their product is the frame hop.
    pub strides: Vec<usize>,
    /// Channels after the input convolution, doubled at every stride.
    pub base_channels: usize,
    pub latent_dim: usize,
    /// Width of the projected features fed to the segment compressor.
    pub feature_dim: usize,
    /// Width of one segment vector, which is also the quantizer input.
    pub hidden: usize,
    pub variant: Variant,
    pub levels: u32,
    pub groups: usize,
    pub time_weight: f64,
    pub mel_terms: Vec<MelTerm>,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            sample_rate: 16000,
            strides: vec![4, 4, 2, 2],
            base_channels: 8,
            latent_dim: 64,
            feature_dim: 24,
            hidden: 24,
            variant: Variant::GsqManyToOne,
            levels: 16,
            groups: 4,
            time_weight: 500.0,
            mel_terms: vec![
                MelTerm { weight: 45.0, n_fft: 1024, hop: 256, n_mels: 80 },
                MelTerm { weight: 1.0, n_fft: 512, hop: 128, n_mels: 64 },
                MelTerm { weight: 1.0, n_fft: 256, hop: 64, n_mels: 32 },
                MelTerm { weight: 1.0, n_fft: 128, hop: 32, n_mels: 16 },
            ],
        }
    }
}

impl CodecConfig {
    pub fn downsample_ratio(&self) -> usize {
        self.strides.iter().product()
    }

    pub fn quantizer_spec(&self) -> QuantizerSpec {
        QuantizerSpec {
            variant: self.variant,
            levels: self.levels,
            groups: self.groups,
            input_dim: self.hidden,
            codebook_size: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("codec sample rate must be positive".into()));
        }
        if self.strides.is_empty() || self.strides.contains(&0) {
            return Err(Error::Config(format!("invalid codec strides {:?}", self.strides)));
        }
        let ratio = self
            .strides
            .iter()
            .try_fold(1usize, |a, &s| a.checked_mul(s))
            .filter(|&r| r <= u16::MAX as usize);
        if ratio.is_none() {
            return Err(Error::Config(format!("downsample ratio of {:?} exceeds 65535", self.strides)));
        }
        if self.base_channels == 0 || self.latent_dim == 0 || self.feature_dim == 0 {
            return Err(Error::Config("codec widths must be positive".into()));
        }
        if self.variant == Variant::Vq {
            return Err(Error::Config("the codec supports fsq, gsq_m2o and gsq_m2m".into()));
        }
        let spec = self.quantizer_spec();
        spec.validate()?;
        if self.levels > u16::MAX as u32 || self.groups > u16::MAX as usize || self.hidden > u16::MAX as usize {
            return Err(Error::Config("levels, groups and hidden must fit in 16 bits".into()));
        }
        if spec.vocab_size().is_none() {
            return Err(Error::Config(format!(
                "{} with {} levels over {} digits does not fit a 64-bit token",
                self.variant,
                self.levels,
                spec.token_digits()
            )));
        }
        if !(self.time_weight >= 0.0) {
            return Err(Error::Config("time weight must be non-negative".into()));
        }
        for m in &self.mel_terms {
            if !(m.weight >= 0.0) || m.hop == 0 || m.n_fft < m.hop || m.n_mels == 0 || m.n_mels > m.n_fft / 2 {
                return Err(Error::Config(format!("invalid mel term {m:?}")));
            }
        }
        Ok(())
    }
}
