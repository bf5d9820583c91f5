use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fsq::{fsq_grid_value, fsq_quantize, fsq_tensor};
use super::token::{compose_token, decompose_token};
use super::{QuantizerSpec, Variant};
use crate::error::{Error, Result};
use crate::ndgrad::init::near_orthogonal;
use crate::ndgrad::{Adam, AdamConfig, ParamStore, Tensor};

/// Plain-array view of the many-to-one projections: `w[g]` compresses
/// group `g` to a scalar, `v[g]` expands it back.
#[derive(Debug, Clone, PartialEq)]
pub struct GsqParams {
    pub w: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

fn check_dim(z: &[f64], spec: &QuantizerSpec) -> Result<()> {
    spec.validate()?;
    if z.len() != spec.input_dim {
        return Err(Error::Shape(format!(
            "quantizer expects dimension {}, got {}",
            spec.input_dim,
            z.len()
        )));
    }
    Ok(())
}

/// Many-to-one GSQ of one vector: `p = W_g z_g`, FSQ on `p`,
/// `z_hat_g = V_g p_hat`.
pub fn gsq_many_to_one(z: &[f64], spec: &QuantizerSpec, params: &GsqParams) -> Result<(Vec<f64>, Vec<u32>)> {
    check_dim(z, spec)?;
    let hg = spec.group_dim();
    if params.w.len() != spec.groups
        || params.v.len() != spec.groups
        || params.w.iter().chain(&params.v).any(|r| r.len() != hg)
    {
        return Err(Error::Shape(format!("gsq params do not match {} groups of {hg}", spec.groups)));
    }
    let mut out = Vec::with_capacity(spec.input_dim);
    let mut idx = Vec::with_capacity(spec.groups);
    for (g, chunk) in z.chunks(hg).enumerate() {
        let p: f64 = params.w[g].iter().zip(chunk).map(|(a, b)| a * b).sum();
        let (p_hat, j) = fsq_quantize(&[p], spec.levels)?;
        out.extend(params.v[g].iter().map(|v| v * p_hat[0]));
        idx.push(j[0]);
    }
    Ok((out, idx))
}

/// Many-to-many GSQ of one vector: FSQ on each of the `G` chunks.
pub fn gsq_many_to_many(z: &[f64], spec: &QuantizerSpec) -> Result<(Vec<f64>, Vec<Vec<u32>>)> {
    check_dim(z, spec)?;
    let mut out = Vec::with_capacity(z.len());
    let mut idx = Vec::with_capacity(spec.groups);
    for chunk in z.chunks(spec.group_dim()) {
        let (v, i) = fsq_quantize(chunk, spec.levels)?;
        out.extend(v);
        idx.push(i);
    }
    Ok((out, idx))
}

/// Quantizer output for a batch of column vectors.
#[derive(Debug, Clone)]
pub struct Quantized {
    /// `[H, S]`, straight-through differentiable.
    pub values: Tensor,
    /// Token digits for each of the `S` columns.
    pub digits: Vec<Vec<u32>>,
}

/// Trainable FSQ / GSQ quantizer over `[H, S]` column batches.
#[derive(Debug, Clone)]
pub struct GroupQuantizer {
    spec: QuantizerSpec,
    w: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl GroupQuantizer {
    /// Registers the many-to-one projections (near-orthogonal init) under
    /// `prefix`; the element-wise variants have no parameters.
    pub fn new(spec: QuantizerSpec, store: &mut ParamStore, prefix: &str, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        if spec.variant == Variant::Vq {
            return Err(Error::Config("vq is not a scalar quantizer".into()));
        }
        let (mut w, mut v) = (Vec::new(), Vec::new());
        if spec.variant == Variant::GsqManyToOne {
            let hg = spec.group_dim();
            for g in 0..spec.groups {
                w.push(store.add(&format!("{prefix}.w{g}"), near_orthogonal(1, hg, 1.0, rng), &[1, hg]));
                v.push(store.add(&format!("{prefix}.v{g}"), near_orthogonal(hg, 1, 1.0, rng), &[hg, 1]));
            }
        }
        Ok(GroupQuantizer { spec, w, v })
    }

    pub fn spec(&self) -> &QuantizerSpec {
        &self.spec
    }

    pub fn params(&self) -> GsqParams {
        GsqParams {
            w: self.w.iter().map(Tensor::to_vec).collect(),
            v: self.v.iter().map(Tensor::to_vec).collect(),
        }
    }

    pub fn quantize(&self, z: &Tensor) -> Result<Quantized> {
        let s = match z.shape() {
            [h, s] if *h == self.spec.input_dim => *s,
            sh => return Err(Error::Shape(format!("quantizer input {sh:?}, expected [{}, S]", self.spec.input_dim))),
        };
        if self.spec.variant != Variant::GsqManyToOne {
            let (q, idx) = fsq_tensor(z, self.spec.levels)?;
            let h = self.spec.input_dim;
            let digits = (0..s).map(|c| (0..h).map(|r| idx[r * s + c]).collect()).collect();
            return Ok(Quantized { values: q, digits });
        }
        let hg = self.spec.group_dim();
        let mut parts = Vec::with_capacity(self.spec.groups);
        let mut digits = vec![Vec::with_capacity(self.spec.groups); s];
        for g in 0..self.spec.groups {
            let p = self.w[g].matmul(&z.slice_rows(g * hg, (g + 1) * hg)?)?;
            let (p_hat, idx) = fsq_tensor(&p, self.spec.levels)?;
            for (d, j) in digits.iter_mut().zip(idx) {
                d.push(j);
            }
            parts.push(self.v[g].matmul(&p_hat)?);
        }
        Ok(Quantized {
            values: Tensor::concat_rows(&parts)?,
            digits,
        })
    }

    /// Reconstruction `[H, S]` from token digits, no gradient history.
    pub fn dequantize(&self, digits: &[Vec<u32>]) -> Result<Tensor> {
        let n = self.spec.token_digits();
        let l = self.spec.levels;
        let s = digits.len();
        if let Some(bad) = digits.iter().find(|d| d.len() != n || d.iter().any(|&j| j >= l)) {
            return Err(Error::InvalidArgument(format!("bad digit vector {bad:?}")));
        }
        let h = self.spec.input_dim;
        let mut out = vec![0.0; h * s];
        if self.spec.variant == Variant::GsqManyToOne {
            let hg = self.spec.group_dim();
            for (c, d) in digits.iter().enumerate() {
                for (g, &j) in d.iter().enumerate() {
                    let p = fsq_grid_value(j, l);
                    for (r, v) in self.v[g].data().iter().enumerate() {
                        out[(g * hg + r) * s + c] = v * p;
                    }
                }
            }
        } else {
            for (c, d) in digits.iter().enumerate() {
                for (r, &j) in d.iter().enumerate() {
                    out[r * s + c] = fsq_grid_value(j, l);
                }
            }
        }
        Ok(Tensor::new(out, &[h, s]))
    }

    pub fn token(&self, digits: &[u32]) -> Result<u64> {
        compose_token(digits, self.spec.levels)
    }

    pub fn digits(&self, token: u64) -> Result<Vec<u32>> {
        decompose_token(token, self.spec.levels, self.spec.token_digits())
    }
}

/// Fits a standalone many-to-one quantizer to minimize mean squared
/// reconstruction error on `data` with straight-through Adam.
pub fn train_group_quantizer(
    data: &[Vec<f64>],
    spec: QuantizerSpec,
    steps: usize,
    lr: f64,
    seed: u64,
) -> Result<(ParamStore, GroupQuantizer)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let q = GroupQuantizer::new(spec, &mut store, "gsq", &mut rng)?;
    let h = spec.input_dim;
    if data.is_empty() || data.iter().any(|x| x.len() != h) {
        return Err(Error::Shape(format!("training data must be non-empty vectors of length {h}")));
    }
    let s = data.len();
    let mut cols = vec![0.0; h * s];
    for (c, x) in data.iter().enumerate() {
        for (r, v) in x.iter().enumerate() {
            cols[r * s + c] = *v;
        }
    }
    let z = Tensor::new(cols, &[h, s]);
    let mut opt = Adam::new(
        store.trainable(),
        AdamConfig {
            lr,
            ..AdamConfig::default()
        },
    );
    for step in 0..steps {
        opt.zero_grad();
        let loss = q.quantize(&z)?.values.l2(&z)?;
        loss.check_finite(&format!("quantizer loss at step {step}"))?;
        loss.backward()?;
        opt.step()?;
    }
    Ok((store, q))
}
