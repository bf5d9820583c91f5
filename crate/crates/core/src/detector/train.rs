use log::{debug, info};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundarySet, Detector, DetectorConfig};
use crate::error::{Error, Result};
use crate::ndgrad::{Adam, AdamConfig, Tensor};

/// `-alpha * cos(z_t, z_{t+k})` for every `t` in `0..T-k`.
pub fn similarity_scores(z: &Tensor, k: usize, alpha: f64) -> Result<Vec<f64>> {
    let t = match z.shape() {
        [_, t] => *t,
        s => return Err(Error::Shape(format!("similarity_scores on {s:?}"))),
    };
    if k == 0 || k >= t {
        return Err(Error::InvalidArgument(format!("need 1 <= k < T, got k={k} T={t}")));
    }
    let cos = z.slice_last(0, t - k)?.cosine_columns(&z.slice_last(k, t - k)?)?;
    Ok(cos.to_vec().into_iter().map(|c| -alpha * c).collect())
}

/// Mean over anchors of `-log(e^{s+/tau} / (e^{s+/tau} + sum_n e^{s_n/tau}))`
/// for positives `[A]` and negatives `[A, N]`.
pub fn contrastive_loss(positives: &Tensor, negatives: &Tensor, tau: f64) -> Result<Tensor> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let a = positives.numel();
    let n = match negatives.shape() {
        [a2, n] if *a2 == a && *n > 0 => *n,
        s => return Err(Error::Shape(format!("negatives {s:?} for {a} positives"))),
    };
    let logits = Tensor::concat_last(&[positives.reshape(&[a, 1])?, negatives.clone()])?.scale(1.0 / tau);
    debug_assert_eq!(logits.shape(), &[a, 1 + n]);
    logits.softmax_cross_entropy(&vec![0; a])
}

/// Plain-number version of [`contrastive_loss`].
pub fn contrastive_loss_values(positives: &[f64], negatives: &[Vec<f64>], tau: f64) -> Result<f64> {
    let n = negatives.first().map_or(0, Vec::len);
    if negatives.len() != positives.len() || n == 0 || negatives.iter().any(|v| v.len() != n) {
        return Err(Error::Shape("each anchor needs the same positive number of negatives".into()));
    }
    let flat: Vec<f64> = negatives.concat();
    contrastive_loss(
        &Tensor::new(positives.to_vec(), &[positives.len()]),
        &Tensor::new(flat, &[positives.len(), n]),
        tau,
    )
    .map(|t| t.item())
}

/// `n` distinct frames of a `t_len`-frame utterance drawn uniformly from
/// those more than `k` frames away from `anchor`.
pub fn sample_negatives<R: Rng + ?Sized>(
    t_len: usize,
    anchor: usize,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let eligible: Vec<usize> = (0..t_len).filter(|&j| j.abs_diff(anchor) > k).collect();
    if eligible.len() < n {
        return Err(Error::InsufficientFrames(format!(
            "anchor {anchor} of {t_len} frames has {} eligible negatives, need {n}",
            eligible.len()
        )));
    }
    Ok(index::sample(rng, eligible.len(), n).into_iter().map(|i| eligible[i]).collect())
}

fn eligible_count(t_len: usize, anchor: usize, k: usize) -> usize {
    let lo = anchor.saturating_sub(k);
    let hi = (anchor + k).min(t_len - 1);
    t_len - (hi - lo + 1)
}

/// Contrastive loss of one utterance. Anchors without enough eligible
/// negatives are skipped.
pub fn utterance_loss<R: Rng + ?Sized>(det: &Detector, samples: &[f64], rng: &mut R) -> Result<Tensor> {
    let cfg = det.config();
    let z = det.forward(samples)?;
    let t = z.shape()[1];
    let (k, n) = (cfg.pred_steps, cfg.n_negatives);
    if t <= k {
        return Err(Error::InsufficientFrames(format!("{t} frames for prediction step {k}")));
    }
    let anchors: Vec<usize> = (0..t - k).filter(|&a| eligible_count(t, a, k) >= n).collect();
    if anchors.is_empty() {
        return Err(Error::InsufficientFrames(format!(
            "no anchor of {t} frames has {n} negatives"
        )));
    }
    let targets: Vec<usize> = anchors.iter().map(|a| a + k).collect();
    let mut rep = Vec::with_capacity(anchors.len() * n);
    let mut neg = Vec::with_capacity(anchors.len() * n);
    for &a in &anchors {
        rep.extend(std::iter::repeat_n(a, n));
        neg.extend(sample_negatives(t, a, n, k, rng)?);
    }
    let za = z.select_columns(&anchors)?;
    let pos = za.cosine_columns(&z.select_columns(&targets)?)?.scale(cfg.alpha);
    let negs = z
        .select_columns(&rep)?
        .cosine_columns(&z.select_columns(&neg)?)?
        .scale(cfg.alpha)
        .reshape(&[anchors.len(), n])?;
    contrastive_loss(&pos, &negs, cfg.tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Training crops are at most this many samples.
    pub crop_samples: usize,
    /// Held-out loss is recorded every this many steps (and at both ends).
    pub eval_every: usize,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        DetectorTrainConfig {
            steps: 200,
            batch_size: 8,
            lr: 1e-3,
            crop_samples: 16000,
            eval_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub train_loss: Option<f64>,
    pub held_out_loss: Option<f64>,
}

#[derive(Debug)]
pub struct TrainedDetector {
    pub detector: Detector,
    pub history: Vec<LossRecord>,
}

impl TrainedDetector {
    pub fn initial_held_out(&self) -> Option<f64> {
        self.history.iter().find_map(|r| r.held_out_loss)
    }

    pub fn final_held_out(&self) -> Option<f64> {
        self.history.iter().rev().find_map(|r| r.held_out_loss)
    }
}

/// Mean contrastive loss over `utterances` with negatives drawn from a
/// fixed seed, so repeated evaluations are comparable.
pub fn held_out_loss(det: &Detector, utterances: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (i, u) in utterances.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ i as u64);
        total += utterance_loss(det, u, &mut rng)?.item();
    }
    Ok(total / utterances.len().max(1) as f64)
}

pub(crate) fn random_crop<'a, R: Rng + ?Sized>(u: &'a [f64], len: usize, rng: &mut R) -> &'a [f64] {
    if u.len() <= len {
        return u;
    }
    let start = rng.random_range(0..=u.len() - len);
    &u[start..start + len]
}

/// Adam on the contrastive loss over random crops of `train`. With
/// `steps == 0` the returned detector is the initialization.
pub fn train_detector(
    cfg: &DetectorConfig,
    tcfg: &DetectorTrainConfig,
    train: &[Vec<f64>],
    held_out: &[Vec<f64>],
    seed: u64,
) -> Result<TrainedDetector> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training utterances".into()));
    }
    let det = Detector::new(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut opt = Adam::new(
        det.store().trainable(),
        AdamConfig {
            lr: tcfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut history = Vec::new();
    let eval = |det: &Detector| -> Result<Option<f64>> {
        if held_out.is_empty() {
            Ok(None)
        } else {
            held_out_loss(det, held_out).map(Some)
        }
    };
    history.push(LossRecord {
        step: 0,
        train_loss: None,
        held_out_loss: eval(&det)?,
    });
    for step in 1..=tcfg.steps {
        opt.zero_grad();
        let mut total = 0.0;
        for _ in 0..tcfg.batch_size.max(1) {
            let u = &train[rng.random_range(0..train.len())];
            let crop = random_crop(u, tcfg.crop_samples, &mut rng);
            let loss = utterance_loss(&det, crop, &mut rng)?.scale(1.0 / tcfg.batch_size.max(1) as f64);
            total += loss.item();
            loss.backward()?;
        }
        if !total.is_finite() {
            return Err(Error::Diverged {
                step,
                message: format!("contrastive loss {total}"),
            });
        }
        opt.step()?;
        let held = if step == tcfg.steps || (tcfg.eval_every > 0 && step % tcfg.eval_every == 0) {
            eval(&det)?
        } else {
            None
        };
        debug!("detector step {step}: train {total:.5}");
        if let Some(h) = held {
            info!("detector step {step}: train {total:.5} held-out {h:.5}");
        }
        history.push(LossRecord {
            step,
            train_loss: Some(total),
            held_out_loss: held,
        });
    }
    Ok(TrainedDetector { detector: det, history })
}

/// F1 of `predicted` against `truth` where a prediction matches an unused
/// true boundary at most `tolerance` frames away (nearest first).
pub fn boundary_f1(predicted: &BoundarySet, truth: &[usize], tolerance: usize) -> f64 {
    let pred = predicted.indices();
    if pred.is_empty() && truth.is_empty() {
        return 1.0;
    }
    let mut used = vec![false; truth.len()];
    let mut hits = 0usize;
    for &p in pred {
        let best = truth
            .iter()
            .enumerate()
            .filter(|(i, &t)| !used[*i] && p.abs_diff(t) <= tolerance)
            .min_by_key(|(_, &t)| p.abs_diff(t));
        if let Some((i, _)) = best {
            used[i] = true;
            hits += 1;
        }
    }
    if hits == 0 {
        return 0.0;
    }
    let precision = hits as f64 / pred.len() as f64;
    let recall = hits as f64 / truth.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_examples() {
        let z = Tensor::new(vec![1.0, 1.0, 0.0, 1.0], &[2, 2]);
        let s = similarity_scores(&z, 1, 1.0).unwrap();
        assert!((s[0] + 0.5f64.sqrt()).abs() < 1e-7);
        let same = Tensor::new(vec![1.0, 1.0, 2.0, 2.0], &[2, 2]);
        assert!((similarity_scores(&same, 1, 1.0).unwrap()[0] + 1.0).abs() < 1e-7);
        let orth = Tensor::new(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]);
        assert!(similarity_scores(&orth, 1, 1.0).unwrap()[0].abs() < 1e-12);
        assert!(similarity_scores(&orth, 2, 1.0).is_err());
    }

    #[test]
    fn loss_examples() {
        let l = contrastive_loss_values(&[0.3], &[vec![0.3]], 1.0).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        let l = contrastive_loss_values(&[1.0], &[vec![0.0]], 1.0).unwrap();
        assert!((l - 0.31326168751822286).abs() < 1e-12);
        let l = contrastive_loss_values(&[1e6], &[vec![0.0]], 1.0).unwrap();
        assert!(l < 1e-12);
        assert!(contrastive_loss_values(&[1.0], &[vec![0.0]], 0.0).is_err());
    }

    #[test]
    fn forced_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_negatives(3, 0, 1, 1, &mut rng).unwrap(), vec![2]);
        assert!(sample_negatives(3, 1, 1, 1, &mut rng).is_err());
    }

    #[test]
    fn negatives_are_reproducible_and_distinct() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_negatives(100, 40, 5, 1, &mut rng).unwrap()
        };
        assert_eq!(draw(9), draw(9));
        let d = draw(9);
        let mut s = d.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 5);
        assert!(d.iter().all(|&j| j.abs_diff(40) > 1));
    }

    #[test]
    fn negatives_are_uniform() {
        // chi-square over 17 eligible frames, 1e5 draws
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (t, anchor) = (20, 7);
        let mut counts = [0f64; 20];
        let draws = 100_000;
        for _ in 0..draws {
            counts[sample_negatives(t, anchor, 1, 1, &mut rng).unwrap()[0]] += 1.0;
        }
        let expected = draws as f64 / 17.0;
        let mut chi2 = 0.0;
        for (j, &c) in counts.iter().enumerate() {
            if j.abs_diff(anchor) <= 1 {
                assert_eq!(c, 0.0);
            } else {
                assert!((c - expected).abs() < 3.0 * (expected * (1.0 - 1.0 / 17.0)).sqrt() + 1.0);
                chi2 += (c - expected).powi(2) / expected;
            }
        }
        // 16 dof, 99.9th percentile is about 39.3
        assert!(chi2 < 39.3, "{chi2}");
    }

    #[test]
    fn f1_matching() {
        let p = BoundarySet::new(vec![5, 20, 33], 50).unwrap();
        assert_eq!(boundary_f1(&p, &[5, 20, 33], 2), 1.0);
        let f = boundary_f1(&p, &[7, 40], 2);
        assert!((f - 2.0 * (1.0 / 3.0) * 0.5 / (1.0 / 3.0 + 0.5)).abs() < 1e-12);
        assert_eq!(boundary_f1(&BoundarySet::empty(10), &[], 2), 1.0);
    }

    #[test]
    fn zero_steps_is_initialization_and_runs_are_deterministic() {
        let cfg = DetectorConfig {
            embed_dim: 8,
            proj_dim: 8,
            ..Default::default()
        };
        let tcfg = DetectorTrainConfig {
            steps: 2,
            batch_size: 2,
            crop_samples: 3200,
            ..Default::default()
        };
        let utt: Vec<Vec<f64>> = (0..3)
            .map(|u| (0..4000).map(|i| ((i * (u + 3)) as f64 * 0.01).sin()).collect())
            .collect();
        let zero = train_detector(&cfg, &DetectorTrainConfig { steps: 0, ..tcfg.clone() }, &utt, &utt[..1], 5).unwrap();
        assert!(zero.detector.store().same_values(Detector::new(&cfg, 5).unwrap().store()));
        let a = train_detector(&cfg, &tcfg, &utt, &utt[..1], 5).unwrap();
        let b = train_detector(&cfg, &tcfg, &utt, &utt[..1], 5).unwrap();
        assert!(a.detector.store().same_values(b.detector.store()));
        assert!(!a.detector.store().same_values(zero.detector.store()));
        assert_eq!(a.history, b.history);
    }
}
