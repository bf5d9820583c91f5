use super::CodecConfig;
use crate::error::{Error, Result};
use crate::ndgrad::{LogMelOp, Tensor};

/// One log-mel resolution of the reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelTerm {
    pub weight: f64,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
}

/// Unweighted components of one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    /// Mean absolute sample error.
    pub time_l1: f64,
    /// Per resolution: mean absolute plus mean squared log-mel error.
    pub mel: Vec<f64>,
    pub total: f64,
}

/// `time_weight * L1(x, x_hat) + sum_i w_i * (L1 + L2)(logmel_i(x), logmel_i(x_hat))`.
#[derive(Debug, Clone)]
pub struct ReconstructionLoss {
    time_weight: f64,
    terms: Vec<(f64, LogMelOp)>,
}

impl ReconstructionLoss {
    pub fn new(cfg: &CodecConfig) -> Result<Self> {
        let terms = cfg
            .mel_terms
            .iter()
            .map(|m| Ok((m.weight, LogMelOp::new(cfg.sample_rate, m.n_fft, m.hop, m.n_mels)?)))
            .collect::<Result<_>>()?;
        Ok(ReconstructionLoss {
            time_weight: cfg.time_weight,
            terms,
        })
    }

    /// Precomputes the target log-mels so repeated evaluations against the
    /// same reference skip that work.
    pub fn target(&self, reference: &[f64]) -> Result<LossTarget> {
        let wave = Tensor::new(reference.to_vec(), &[reference.len()]);
        let mels = self.terms.iter().map(|(_, op)| op.forward(&wave)).collect::<Result<_>>()?;
        Ok(LossTarget { wave, mels })
    }

    /// Differentiable in `output`.
    pub fn compute(&self, target: &LossTarget, output: &Tensor) -> Result<Tensor> {
        let out = output.reshape(&[output.numel()])?;
        if out.numel() != target.wave.numel() {
            return Err(Error::Shape(format!(
                "reconstruction has {} samples, reference {}",
                out.numel(),
                target.wave.numel()
            )));
        }
        let mut total = out.l1(&target.wave)?.scale(self.time_weight);
        for ((w, op), want) in self.terms.iter().zip(&target.mels) {
            let got = op.forward(&out)?;
            let term = got.l1(want)?.add(&got.l2(want)?)?;
            total = total.add(&term.scale(*w))?;
        }
        Ok(total)
    }

    pub fn terms(&self, reference: &[f64], output: &[f64]) -> Result<LossTerms> {
        let target = self.target(reference)?;
        let out = Tensor::new(output.to_vec(), &[output.len()]);
        if output.len() != reference.len() {
            return Err(Error::Shape("reconstruction length differs from reference".into()));
        }
        let time_l1 = out.l1(&target.wave)?.item();
        let mut mel = Vec::with_capacity(self.terms.len());
        for ((_, op), want) in self.terms.iter().zip(&target.mels) {
            let got = op.forward(&out)?;
            mel.push(got.l1(want)?.item() + got.l2(want)?.item());
        }
        let total = self.time_weight * time_l1 + self.terms.iter().zip(&mel).map(|((w, _), m)| w * m).sum::<f64>();
        Ok(LossTerms { time_l1, mel, total })
    }
}

#[derive(Debug, Clone)]
pub struct LossTarget {
    wave: Tensor,
    mels: Vec<Tensor>,
}
