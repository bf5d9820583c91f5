use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{LossTarget, ReconstructionLoss};
use super::{Codec, CodecConfig};
use crate::detector::train::random_crop;
use crate::detector::{BoundarySet, Detector, LossRecord};
use crate::error::{Error, Result};
use crate::ndgrad::{Adam, AdamConfig, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct CodecTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub crop_samples: usize,
    pub eval_every: usize,
}

impl Default for CodecTrainConfig {
    fn default() -> Self {
        CodecTrainConfig {
            steps: 500,
            batch_size: 4,
            lr: 1e-3,
            crop_samples: 8000,
            eval_every: 100,
        }
    }
}

#[derive(Debug)]
pub struct TrainedCodec {
    pub codec: Codec,
    pub history: Vec<LossRecord>,
}

impl TrainedCodec {
    pub fn initial_held_out(&self) -> Option<f64> {
        self.history.iter().find_map(|r| r.held_out_loss)
    }

    pub fn final_held_out(&self) -> Option<f64> {
        self.history.iter().rev().find_map(|r| r.held_out_loss)
    }
}

struct Example {
    padded: Tensor,
    boundaries: BoundarySet,
    target: LossTarget,
}

fn example(codec: &Codec, detector: &Detector, loss: &ReconstructionLoss, crop: &[f64]) -> Result<Example> {
    let padded = codec.pad(crop);
    let boundaries = codec.segment_boundaries(detector, &padded)?;
    let target = loss.target(&padded)?;
    let n = padded.len();
    Ok(Example {
        padded: Tensor::new(padded, &[n]),
        boundaries,
        target,
    })
}

fn mean_loss(codec: &Codec, loss: &ReconstructionLoss, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for e in examples {
        let (y, _) = codec.forward(&e.padded, &e.boundaries)?;
        total += loss.compute(&e.target, &y)?.item();
    }
    Ok(total / examples.len() as f64)
}

/// Adam on the reconstruction loss over random crops of `train`; the
/// detector only supplies boundaries. Held-out loss uses the first
/// `crop_samples` of each held-out utterance.
pub fn train_codec(
    cfg: &CodecConfig,
    tcfg: &CodecTrainConfig,
    detector: &Detector,
    train: &[Vec<f64>],
    held_out: &[Vec<f64>],
    seed: u64,
) -> Result<TrainedCodec> {
    let codec = Codec::new(cfg, seed)?;
    if train.iter().all(|u| u.is_empty()) {
        return Err(Error::InvalidArgument("no non-empty training utterances".into()));
    }
    let loss = ReconstructionLoss::new(cfg)?;
    let held: Vec<Example> = held_out
        .iter()
        .filter(|u| !u.is_empty())
        .map(|u| example(&codec, detector, &loss, &u[..u.len().min(tcfg.crop_samples)]))
        .collect::<Result<_>>()?;
    let eval = |codec: &Codec| -> Result<Option<f64>> {
        if held.is_empty() {
            Ok(None)
        } else {
            mean_loss(codec, &loss, &held).map(Some)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut opt = Adam::new(
        codec.store().trainable(),
        AdamConfig {
            lr: tcfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut history = vec![LossRecord {
        step: 0,
        train_loss: None,
        held_out_loss: eval(&codec)?,
    }];
    let batch = tcfg.batch_size.max(1);
    for step in 1..=tcfg.steps {
        opt.zero_grad();
        let mut total = 0.0;
        for _ in 0..batch {
            let u = loop {
                let u = &train[rng.random_range(0..train.len())];
                if !u.is_empty() {
                    break u;
                }
            };
            let e = example(&codec, detector, &loss, random_crop(u, tcfg.crop_samples, &mut rng))?;
            let (y, _) = codec.forward(&e.padded, &e.boundaries)?;
            let l = loss.compute(&e.target, &y)?.scale(1.0 / batch as f64);
            total += l.item();
            l.backward()?;
        }
        if !total.is_finite() {
            return Err(Error::Diverged {
                step,
                message: format!("reconstruction loss {total}"),
            });
        }
        opt.step()?;
        let held_loss = if step == tcfg.steps || (tcfg.eval_every > 0 && step % tcfg.eval_every == 0) {
            eval(&codec)?
        } else {
            None
        };
        debug!("codec step {step}: train {total:.4}");
        if let Some(h) = held_loss {
            info!("codec step {step}: train {total:.4} held-out {h:.4}");
        }
        history.push(LossRecord {
            step,
            train_loss: Some(total),
            held_out_loss: held_loss,
        });
    }
    Ok(TrainedCodec { codec, history })
}
