use std::rc::Rc;

use super::tensor::Tensor;
use crate::audio::spectral::{log_mel_with, MelFilterbank, StftPlan};
use crate::error::{Error, Result};

struct Inner {
    plan: StftPlan,
    bank: MelFilterbank,
}

/// Differentiable `log(1e-5 + mel(|STFT|^2))` of a waveform tensor, using
/// the same framing as [`crate::audio::mel_spectrogram`].
#[derive(Clone)]
pub struct LogMelOp {
    inner: Rc<Inner>,
}

impl std::fmt::Debug for LogMelOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMelOp")
            .field("n_fft", &self.inner.plan.n_fft)
            .field("hop", &self.inner.plan.hop)
            .field("n_mels", &self.inner.bank.n_mels)
            .finish()
    }
}

impl LogMelOp {
    pub fn new(sample_rate: u32, n_fft: usize, hop: usize, n_mels: usize) -> Result<Self> {
        Ok(LogMelOp {
            inner: Rc::new(Inner {
                plan: StftPlan::new(n_fft, hop)?,
                bank: MelFilterbank::new(sample_rate, n_fft, n_mels)?,
            }),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.inner.bank.n_mels
    }

    /// Any tensor is treated as a flat waveform. Returns `[frames, n_mels]`.
    pub fn forward(&self, signal: &Tensor) -> Result<Tensor> {
        let x = signal.to_vec();
        if x.is_empty() {
            return Err(Error::Shape("log-mel of an empty signal".into()));
        }
        let Inner { plan, bank } = &*self.inner;
        let mel = log_mel_with(plan, bank, &x);
        let shape = vec![mel.n_frames, mel.n_mels];
        if !signal.requires_grad() {
            return Ok(Tensor::new(mel.values, &shape));
        }
        let inner = Rc::clone(&self.inner);
        let len = x.len();
        Ok(Tensor::from_op(
            mel.values,
            shape,
            vec![signal.clone()],
            Box::new(move |g, out, parents| {
                let Inner { plan, bank } = &*inner;
                let x = parents[0].data();
                let spec = plan.analyze(&x);
                let bins = plan.n_bins();
                let n_frames = spec.len() / bins;
                let n_mels = bank.n_mels;
                // d out / d energy = 1 / (floor + energy) = exp(-out)
                let mut g_power = vec![0.0; n_frames * bins];
                for t in 0..n_frames {
                    let gp = &mut g_power[t * bins..(t + 1) * bins];
                    for m in 0..n_mels {
                        let ge = g[t * n_mels + m] * (-out[t * n_mels + m]).exp();
                        if ge == 0.0 {
                            continue;
                        }
                        for (slot, w) in gp.iter_mut().zip(bank.row(m)) {
                            *slot += ge * w;
                        }
                    }
                }
                vec![Some(plan.power_backward(&spec, &g_power, len))]
            }),
        ))
    }
}
