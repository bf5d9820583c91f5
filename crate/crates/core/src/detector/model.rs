use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{boundaries_from_trace, BoundarySet, DetectorConfig};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::ndgrad::init::near_orthogonal;
use crate::ndgrad::{Padding, ParamStore, Tensor};

struct ConvLayer {
    weight: Tensor,
    bias: Tensor,
    gamma: Tensor,
    beta: Tensor,
    kernel: usize,
    stride: usize,
}

/// Conv stack plus linear projection. Parameters live in a [`ParamStore`]
/// that doubles as the checkpoint.
pub struct Detector {
    cfg: DetectorConfig,
    store: ParamStore,
    layers: Vec<ConvLayer>,
    proj_weight: Tensor,
    proj_bias: Tensor,
}

impl std::fmt::Debug for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Detector").field("cfg", &self.cfg).finish()
    }
}

fn meta_values(cfg: &DetectorConfig) -> Vec<(&'static str, Vec<f64>)> {
    let as_f = |v: &[usize]| v.iter().map(|&x| x as f64).collect();
    vec![
        ("meta.kernel_sizes", as_f(&cfg.kernel_sizes)),
        ("meta.strides", as_f(&cfg.strides)),
        ("meta.embed_dim", vec![cfg.embed_dim as f64]),
        ("meta.proj_dim", vec![cfg.proj_dim as f64]),
    ]
}

impl Detector {
    /// Fresh near-orthogonally initialized detector.
    pub fn new(cfg: &DetectorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, v) in meta_values(cfg) {
            let n = v.len();
            store.add_constant(name, v, &[n]);
        }
        let mut layers = Vec::new();
        let mut c_in = 1;
        for (i, (&k, &s)) in cfg.kernel_sizes.iter().zip(&cfg.strides).enumerate() {
            let c_out = cfg.embed_dim;
            let gain = (2.0 / (1.0 + 0.2f64.powi(2))).sqrt();
            let w = near_orthogonal(c_out, c_in * k, gain, &mut rng);
            layers.push(ConvLayer {
                weight: store.add(&format!("conv{i}.weight"), w, &[c_out, c_in, k]),
                bias: store.add(&format!("conv{i}.bias"), vec![0.0; c_out], &[c_out]),
                gamma: store.add(&format!("norm{i}.gamma"), vec![1.0; c_out], &[c_out]),
                beta: store.add(&format!("norm{i}.beta"), vec![0.0; c_out], &[c_out]),
                kernel: k,
                stride: s,
            });
            c_in = c_out;
        }
        let pw = near_orthogonal(cfg.proj_dim, cfg.embed_dim, 1.0, &mut rng);
        let proj_weight = store.add("proj.weight", pw, &[cfg.proj_dim, cfg.embed_dim]);
        let proj_bias = store.add("proj.bias", vec![0.0; cfg.proj_dim], &[cfg.proj_dim]);
        Ok(Detector {
            cfg: cfg.clone(),
            store,
            layers,
            proj_weight,
            proj_bias,
        })
    }

    /// Builds a detector for `cfg` and copies checkpoint values into it.
    /// Architecture mismatches are reported as checkpoint errors.
    pub fn from_store(cfg: &DetectorConfig, ckpt: &ParamStore) -> Result<Self> {
        let det = Detector::new(cfg, 0)?;
        for (name, want) in meta_values(cfg) {
            let got = ckpt.require(name)?.to_vec();
            if got != want {
                return Err(Error::Checkpoint(format!(
                    "detector checkpoint {name} is {got:?}, config expects {want:?}"
                )));
            }
        }
        det.store.load_from(ckpt)?;
        Ok(det)
    }

    pub fn load(cfg: &DetectorConfig, path: &Path) -> Result<Self> {
        Detector::from_store(cfg, &ParamStore::load(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.store.save(path)
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Latent sequence `[proj_dim, T]` with `T = frames_for(len)`.
    pub fn forward(&self, samples: &[f64]) -> Result<Tensor> {
        self.forward_tensor(&Tensor::new(samples.to_vec(), &[1, 1, samples.len()]))
    }

    pub(crate) fn forward_tensor(&self, x: &Tensor) -> Result<Tensor> {
        let len = x.numel();
        let need = self.cfg.hop();
        if len < need {
            return Err(Error::AudioTooShort { got: len, need });
        }
        let mut h = x.reshape(&[1, 1, len])?;
        for layer in &self.layers {
            let t = h.shape()[2];
            let pad = Padding::same_ceil(t, layer.kernel, layer.stride);
            h = h
                .conv1d(&layer.weight, Some(&layer.bias), layer.stride, pad)?
                .layer_norm_channels(&layer.gamma, &layer.beta)?
                .leaky_relu();
        }
        let t = h.shape()[2];
        h.reshape(&[self.cfg.embed_dim, t])?
            .linear(&self.proj_weight, Some(&self.proj_bias))
    }

    /// `1 - cos(z_t, z_{t+1})` for `t` in `0..T-1`.
    pub fn dissimilarity(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let z = self.forward(samples)?;
        let t = z.shape()[1];
        if t < 2 {
            return Err(Error::InsufficientFrames(format!(
                "boundary detection needs at least 2 frames, got {t}"
            )));
        }
        let cos = z.slice_last(0, t - 1)?.cosine_columns(&z.slice_last(1, t - 1)?)?;
        Ok(cos.to_vec().into_iter().map(|c| 1.0 - c).collect())
    }

    pub fn detect(&self, samples: &[f64]) -> Result<BoundarySet> {
        let trace = self.dissimilarity(samples)?;
        boundaries_from_trace(&trace, trace.len() + 1, &self.cfg.peak_constraints())
    }

    pub fn detect_boundaries(&self, audio: &AudioBuffer) -> Result<BoundarySet> {
        self.detect(audio.samples())
    }
}
