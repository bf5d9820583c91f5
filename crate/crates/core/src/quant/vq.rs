use rand::Rng;

use crate::error::{Error, Result};
use crate::ndgrad::Tensor;

/// `size` codes of dimension `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub dim: usize,
    pub codes: Vec<f64>,
}

impl Codebook {
    pub fn new(dim: usize, codes: Vec<f64>) -> Result<Self> {
        if dim == 0 || codes.is_empty() || codes.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "codebook of {} values is not a non-empty multiple of dim {dim}",
                codes.len()
            )));
        }
        Ok(Codebook { dim, codes })
    }

    /// Codes drawn from `samples` (with replacement).
    pub fn from_samples<R: Rng + ?Sized>(samples: &[Vec<f64>], size: usize, rng: &mut R) -> Result<Self> {
        if samples.is_empty() || size == 0 {
            return Err(Error::InvalidArgument("empty sample set or codebook".into()));
        }
        let dim = samples[0].len();
        let codes = (0..size)
            .flat_map(|_| samples[rng.random_range(0..samples.len())].clone())
            .collect();
        Codebook::new(dim, codes)
    }

    pub fn size(&self) -> usize {
        self.codes.len() / self.dim
    }

    pub fn code(&self, i: usize) -> &[f64] {
        &self.codes[i * self.dim..(i + 1) * self.dim]
    }

    /// Nearest code by squared Euclidean distance, lowest index on ties.
    pub fn nearest(&self, z: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.size() {
            let d: f64 = self.code(i).iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// One exponential-moving-average step on a batch. Codes whose usage
    /// count decays below `dead_threshold` are replaced by random batch
    /// vectors.
    pub fn ema_update<R: Rng + ?Sized>(&mut self, state: &mut EmaState, batch: &[Vec<f64>], rng: &mut R) {
        let (k, d) = (self.size(), self.dim);
        if state.counts.len() != k {
            *state = EmaState::new(self, state.decay);
        }
        let mut counts = vec![0.0; k];
        let mut sums = vec![0.0; k * d];
        for z in batch {
            let i = self.nearest(z);
            counts[i] += 1.0;
            for (s, v) in sums[i * d..(i + 1) * d].iter_mut().zip(z) {
                *s += v;
            }
        }
        let a = state.decay;
        for i in 0..k {
            state.counts[i] = a * state.counts[i] + (1.0 - a) * counts[i];
            for j in 0..d {
                state.sums[i * d + j] = a * state.sums[i * d + j] + (1.0 - a) * sums[i * d + j];
            }
        }
        let total: f64 = state.counts.iter().sum();
        for i in 0..k {
            // Laplace smoothing keeps rarely used codes finite
            let n = (state.counts[i] + 1e-5) / (total + k as f64 * 1e-5) * total;
            if state.counts[i] < state.dead_threshold && !batch.is_empty() {
                let z = &batch[rng.random_range(0..batch.len())];
                self.codes[i * d..(i + 1) * d].copy_from_slice(z);
                state.counts[i] = 1.0;
                state.sums[i * d..(i + 1) * d].copy_from_slice(z);
            } else if n > 0.0 {
                for j in 0..d {
                    self.codes[i * d + j] = state.sums[i * d + j] / n;
                }
            }
        }
    }
}

/// Running statistics for [`Codebook::ema_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub decay: f64,
    pub dead_threshold: f64,
    pub counts: Vec<f64>,
    pub sums: Vec<f64>,
}

impl EmaState {
    /// Starts with every code counted once at its current position.
    pub fn new(codebook: &Codebook, decay: f64) -> Self {
        EmaState {
            decay,
            dead_threshold: 1e-2,
            counts: vec![1.0; codebook.size()],
            sums: codebook.codes.clone(),
        }
    }
}

pub fn vq_quantize(z: &[f64], codebook: &Codebook) -> Result<(Vec<f64>, usize)> {
    if z.len() != codebook.dim {
        return Err(Error::Shape(format!("vq input {} vs codebook dim {}", z.len(), codebook.dim)));
    }
    let i = codebook.nearest(z);
    Ok((codebook.code(i).to_vec(), i))
}

/// Straight-through VQ of the columns of `[dim, S]`.
pub fn vq_tensor(z: &Tensor, codebook: &Codebook) -> Result<(Tensor, Vec<usize>)> {
    let (d, s) = match z.shape() {
        [d, s] if *d == codebook.dim => (*d, *s),
        sh => return Err(Error::Shape(format!("vq input {sh:?}"))),
    };
    let x = z.to_vec();
    let mut delta = vec![0.0; d * s];
    let mut idx = Vec::with_capacity(s);
    for c in 0..s {
        let col: Vec<f64> = (0..d).map(|r| x[r * s + c]).collect();
        let i = codebook.nearest(&col);
        for r in 0..d {
            delta[r * s + c] = codebook.code(i)[r] - col[r];
        }
        idx.push(i);
    }
    Ok((z.add(&Tensor::new(delta, &[d, s]))?, idx))
}

/// Stages applied to successive residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVq {
    pub stages: Vec<Codebook>,
}

impl ResidualVq {
    pub fn quantize(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        if self.stages.is_empty() {
            return Err(Error::InvalidArgument("residual vq without stages".into()));
        }
        let mut residual = z.to_vec();
        let mut out = vec![0.0; z.len()];
        let mut idx = Vec::with_capacity(self.stages.len());
        for cb in &self.stages {
            let (q, i) = vq_quantize(&residual, cb)?;
            for ((o, r), v) in out.iter_mut().zip(residual.iter_mut()).zip(&q) {
                *o += v;
                *r -= v;
            }
            idx.push(i);
        }
        Ok((out, idx))
    }

    /// Greedy stage-by-stage EMA fitting on `data`.
    pub fn fit<R: Rng + ?Sized>(data: &[Vec<f64>], depth: usize, size: usize, iters: usize, rng: &mut R) -> Result<Self> {
        let mut residuals = data.to_vec();
        let mut stages = Vec::with_capacity(depth);
        for _ in 0..depth {
            let mut cb = Codebook::from_samples(&residuals, size, rng)?;
            let mut state = EmaState::new(&cb, 0.99);
            for _ in 0..iters {
                cb.ema_update(&mut state, &residuals, rng);
            }
            for r in residuals.iter_mut() {
                let i = cb.nearest(r);
                r.iter_mut().zip(cb.code(i)).for_each(|(x, c)| *x -= c);
            }
            stages.push(cb);
        }
        Ok(ResidualVq { stages })
    }
}
