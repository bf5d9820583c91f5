use std::path::Path;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stream::{Record, StreamHeader, TokenStream};
use super::CodecConfig;
use crate::audio::AudioBuffer;
use crate::detector::{BoundarySet, Detector};
use crate::error::{Error, Result};
use crate::ndgrad::init::near_orthogonal;
use crate::ndgrad::{Padding, ParamStore, Tensor};
use crate::quant::GroupQuantizer;
use crate::segmenter::{partition, reassemble, SegmentAutoencoder, SegmentLayout};

const RELU_GAIN: f64 = 1.386_750_490_563_073; // sqrt(2 / (1 + 0.2^2))

struct Conv {
    w: Tensor,
    b: Tensor,
    kernel: usize,
}

impl Conv {
    fn new(store: &mut ParamStore, name: &str, c_in: usize, c_out: usize, kernel: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let w = near_orthogonal(c_out, c_in * kernel, gain, rng);
        Conv {
            w: store.add(&format!("{name}.weight"), w, &[c_out, c_in, kernel]),
            b: store.add(&format!("{name}.bias"), vec![0.0; c_out], &[c_out]),
            kernel,
        }
    }

    /// Stride-1 convolution that keeps the length.
    fn same(&self, x: &Tensor) -> Result<Tensor> {
        let k = self.kernel;
        let pad = Padding { left: (k - 1) / 2, right: k / 2 };
        x.conv1d(&self.w, Some(&self.b), 1, pad)
    }

    fn down(&self, x: &Tensor, stride: usize) -> Result<Tensor> {
        let pad = Padding::same_ceil(x.shape()[2], self.kernel, stride);
        x.conv1d(&self.w, Some(&self.b), stride, pad)
    }
}

struct Residual {
    a: Conv,
    b: Conv,
}

impl Residual {
    fn new(store: &mut ParamStore, name: &str, c: usize, rng: &mut ChaCha8Rng) -> Self {
        Residual {
            a: Conv::new(store, &format!("{name}.a"), c, c, 3, RELU_GAIN, rng),
            b: Conv::new(store, &format!("{name}.b"), c, c, 1, 0.5, rng),
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.a.same(&x.leaky_relu())?;
        x.add(&self.b.same(&h.leaky_relu())?)
    }
}

struct UpConv {
    w: Tensor,
    b: Tensor,
    stride: usize,
}

impl UpConv {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let t = x.shape()[2];
        let y = x.conv_transpose1d(&self.w, Some(&self.b), self.stride)?;
        y.slice_last(self.stride / 2, t * self.stride)
    }
}

/// Trained parameters plus the architecture they belong to. The
/// [`ParamStore`] doubles as the checkpoint.
pub struct Codec {
    cfg: CodecConfig,
    store: ParamStore,
    enc_in: Conv,
    enc_blocks: Vec<(Residual, Conv, usize)>,
    enc_out: Conv,
    down: (Tensor, Tensor),
    segments: SegmentAutoencoder,
    quantizer: GroupQuantizer,
    up: (Tensor, Tensor),
    dec_in: Conv,
    dec_blocks: Vec<(UpConv, Residual)>,
    dec_out: Conv,
}

impl std::fmt::Debug for Codec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Codec").field("cfg", &self.cfg).finish()
    }
}

fn meta_values(cfg: &CodecConfig) -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("meta.sample_rate", vec![cfg.sample_rate as f64]),
        ("meta.strides", cfg.strides.iter().map(|&s| s as f64).collect()),
        ("meta.base_channels", vec![cfg.base_channels as f64]),
        ("meta.latent_dim", vec![cfg.latent_dim as f64]),
        ("meta.feature_dim", vec![cfg.feature_dim as f64]),
        ("meta.hidden", vec![cfg.hidden as f64]),
        ("meta.variant", vec![cfg.variant.tag() as f64]),
        ("meta.levels", vec![cfg.levels as f64]),
        ("meta.groups", vec![cfg.groups as f64]),
    ]
}

/// Maps detector frame indices onto codec frames (`round(b * hop_d / ratio)`),
/// dropping anything that lands on `0` or at/after `total`.
pub fn map_boundaries(detector_frames: &[usize], detector_hop: usize, ratio: usize, total: usize) -> BoundarySet {
    let mut mapped: Vec<usize> = detector_frames
        .iter()
        .map(|&b| (b * detector_hop + ratio / 2) / ratio)
        .filter(|&b| b > 0 && b < total)
        .collect();
    mapped.dedup();
    BoundarySet::new(mapped, total).expect("mapped boundaries are sorted and in range")
}

impl Codec {
    pub fn new(cfg: &CodecConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, v) in meta_values(cfg) {
            let n = v.len();
            store.add_constant(name, v, &[n]);
        }
        let rng = &mut rng;
        let st = &mut store;
        let mut c = cfg.base_channels;
        let enc_in = Conv::new(st, "enc.in", 1, c, 7, 1.0, rng);
        let mut enc_blocks = Vec::new();
        for (i, &s) in cfg.strides.iter().enumerate() {
            let res = Residual::new(st, &format!("enc.block{i}.res"), c, rng);
            let down = Conv::new(st, &format!("enc.block{i}.down"), c, 2 * c, 2 * s, RELU_GAIN, rng);
            enc_blocks.push((res, down, s));
            c *= 2;
        }
        let enc_out = Conv::new(st, "enc.out", c, cfg.latent_dim, 3, RELU_GAIN, rng);
        let down = (
            st.add("feat.down.weight", near_orthogonal(cfg.feature_dim, cfg.latent_dim, 1.0, rng), &[cfg.feature_dim, cfg.latent_dim]),
            st.add("feat.down.bias", vec![0.0; cfg.feature_dim], &[cfg.feature_dim]),
        );
        let segments = SegmentAutoencoder::new(cfg.feature_dim, cfg.hidden, st, "seg", rng)?;
        let quantizer = GroupQuantizer::new(cfg.quantizer_spec(), st, "quant", rng)?;
        let up = (
            st.add("feat.up.weight", near_orthogonal(cfg.latent_dim, cfg.feature_dim, 1.0, rng), &[cfg.latent_dim, cfg.feature_dim]),
            st.add("feat.up.bias", vec![0.0; cfg.latent_dim], &[cfg.latent_dim]),
        );
        let dec_in = Conv::new(st, "dec.in", cfg.latent_dim, c, 7, 1.0, rng);
        let mut dec_blocks = Vec::new();
        for (i, &s) in cfg.strides.iter().enumerate().rev() {
            let k = 2 * s;
            let w = near_orthogonal(c, (c / 2) * k, RELU_GAIN, rng);
            let up = UpConv {
                w: st.add(&format!("dec.block{i}.up.weight"), w, &[c, c / 2, k]),
                b: st.add(&format!("dec.block{i}.up.bias"), vec![0.0; c / 2], &[c / 2]),
                stride: s,
            };
            c /= 2;
            let res = Residual::new(st, &format!("dec.block{i}.res"), c, rng);
            dec_blocks.push((up, res));
        }
        let dec_out = Conv::new(st, "dec.out", c, 1, 7, 0.1, rng);
        Ok(Codec {
            cfg: cfg.clone(),
            store,
            enc_in,
            enc_blocks,
            enc_out,
            down,
            segments,
            quantizer,
            up,
            dec_in,
            dec_blocks,
            dec_out,
        })
    }

    /// Builds a codec for `cfg` and copies checkpoint values into it.
    pub fn from_store(cfg: &CodecConfig, ckpt: &ParamStore) -> Result<Self> {
        let codec = Codec::new(cfg, 0)?;
        for (name, want) in meta_values(cfg) {
            let got = ckpt.require(name)?.to_vec();
            if got != want {
                return Err(Error::Checkpoint(format!(
                    "codec checkpoint {name} is {got:?}, config expects {want:?}"
                )));
            }
        }
        codec.store.load_from(ckpt)?;
        Ok(codec)
    }

    pub fn load(cfg: &CodecConfig, path: &Path) -> Result<Self> {
        Codec::from_store(cfg, &ParamStore::load(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.store.save(path)
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn quantizer(&self) -> &GroupQuantizer {
        &self.quantizer
    }

    pub fn downsample_ratio(&self) -> usize {
        self.cfg.downsample_ratio()
    }

    /// Samples right-padded with zeros to a multiple of the frame hop.
    pub fn pad(&self, samples: &[f64]) -> Vec<f64> {
        let r = self.downsample_ratio();
        let mut x = samples.to_vec();
        x.resize(samples.len().div_ceil(r) * r, 0.0);
        x
    }

    /// Projected features `[feature_dim, T]` for padded samples.
    pub fn features(&self, padded: &Tensor) -> Result<Tensor> {
        let n = padded.numel();
        let r = self.downsample_ratio();
        if n == 0 || n % r != 0 {
            return Err(Error::Shape(format!("encoder input of {n} samples is not a positive multiple of {r}")));
        }
        let mut h = self.enc_in.same(&padded.reshape(&[1, 1, n])?)?;
        for (res, down, s) in &self.enc_blocks {
            h = down.down(&res.forward(&h)?.leaky_relu(), *s)?;
        }
        let h = self.enc_out.same(&h.leaky_relu())?;
        let t = h.shape()[2];
        debug_assert_eq!(t, n / r);
        h.reshape(&[self.cfg.latent_dim, t])?.linear(&self.down.0, Some(&self.down.1))
    }

    /// Waveform from features `[feature_dim, T]`, length `T * ratio`.
    pub fn synthesize(&self, features: &Tensor) -> Result<Tensor> {
        let t = features.shape()[1];
        let h = features.linear(&self.up.0, Some(&self.up.1))?;
        let mut h = self.dec_in.same(&h.reshape(&[1, self.cfg.latent_dim, t])?)?;
        for (up, res) in &self.dec_blocks {
            h = res.forward(&up.forward(&h.leaky_relu())?)?;
        }
        let y = self.dec_out.same(&h.leaky_relu())?.tanh();
        let n = y.numel();
        y.reshape(&[n])
    }

    /// Codec-frame boundaries for padded samples. Audio too short for two
    /// detector frames gets a single segment.
    pub fn segment_boundaries(&self, detector: &Detector, padded: &[f64]) -> Result<BoundarySet> {
        let total = padded.len() / self.downsample_ratio();
        let hop = detector.config().hop();
        if padded.len() < 2 * hop {
            return BoundarySet::new(vec![], total);
        }
        let det = detector.detect(padded)?;
        let b = map_boundaries(det.indices(), hop, self.downsample_ratio(), total);
        debug!("{} detector boundaries -> {} codec boundaries over {total} frames", det.len(), b.len());
        Ok(b)
    }

    /// Full differentiable pass: encode, segment, quantize, expand, decode.
    /// Returns the reconstruction (same length as `padded`) and the digits.
    pub fn forward(&self, padded: &Tensor, boundaries: &BoundarySet) -> Result<(Tensor, Vec<Vec<u32>>)> {
        let feats = self.features(padded)?;
        let (segs, layout) = partition(&feats, boundaries)?;
        let z = segs
            .iter()
            .map(|s| self.segments.compress(s))
            .collect::<Result<Vec<_>>>()?;
        let q = self.quantizer.quantize(&Tensor::concat_last(&z)?)?;
        let recon = self.expand_segments(&q.values, &layout)?;
        Ok((self.synthesize(&recon)?, q.digits))
    }

    fn expand_segments(&self, values: &Tensor, layout: &SegmentLayout) -> Result<Tensor> {
        let parts = layout
            .lengths()
            .iter()
            .enumerate()
            .map(|(i, &l)| self.segments.expand(&values.select_columns(&[i])?, l))
            .collect::<Result<Vec<_>>>()?;
        reassemble(&parts, layout)
    }

    pub fn header(&self, samples: u64) -> StreamHeader {
        StreamHeader {
            sample_rate: self.cfg.sample_rate,
            downsample_ratio: self.downsample_ratio() as u16,
            variant: self.cfg.variant,
            levels: self.cfg.levels as u16,
            groups: self.cfg.groups as u16,
            hidden: self.cfg.hidden as u16,
            utterance_sample_count: samples,
        }
    }

    pub fn encode(&self, detector: &Detector, audio: &AudioBuffer) -> Result<TokenStream> {
        if audio.sample_rate() != self.cfg.sample_rate {
            return Err(Error::InvalidArgument(format!(
                "audio is {} Hz, codec expects {} Hz",
                audio.sample_rate(),
                self.cfg.sample_rate
            )));
        }
        let header = self.header(audio.len() as u64);
        if audio.is_empty() {
            return TokenStream::new(header, vec![]);
        }
        let padded = self.pad(audio.samples());
        let boundaries = self.segment_boundaries(detector, &padded)?;
        let x = Tensor::new(padded, &[boundaries.total() * self.downsample_ratio()]);
        let feats = self.features(&x)?;
        let (segs, layout) = partition(&feats, &boundaries)?;
        let z = segs
            .iter()
            .map(|s| self.segments.compress(s))
            .collect::<Result<Vec<_>>>()?;
        let q = self.quantizer.quantize(&Tensor::concat_last(&z)?)?;
        let records = layout
            .lengths()
            .into_iter()
            .zip(&q.digits)
            .map(|(l, d)| {
                Ok(Record {
                    length: l as u64,
                    token: self.quantizer.token(d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TokenStream::new(header, records)
    }

    pub fn decode(&self, stream: &TokenStream) -> Result<AudioBuffer> {
        let want = self.header(stream.header.utterance_sample_count);
        if stream.header != want {
            return Err(Error::Config(format!(
                "stream header {:?} does not match this codec {want:?}",
                stream.header
            )));
        }
        let n = stream.header.utterance_sample_count as usize;
        if stream.records.is_empty() {
            return AudioBuffer::new(vec![], self.cfg.sample_rate);
        }
        let layout = SegmentLayout::from_lengths(&stream.lengths())?;
        let digits = stream
            .records
            .iter()
            .map(|r| self.quantizer.digits(r.token))
            .collect::<Result<Vec<_>>>()?;
        let values = self.quantizer.dequantize(&digits)?;
        let y = self.synthesize(&self.expand_segments(&values, &layout)?)?;
        let mut samples = y.to_vec();
        samples.truncate(n);
        AudioBuffer::new(samples, self.cfg.sample_rate)
    }

    pub fn reconstruct(&self, detector: &Detector, audio: &AudioBuffer) -> Result<AudioBuffer> {
        self.decode(&self.encode(detector, audio)?)
    }
}
