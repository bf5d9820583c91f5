//! Acceptance checks shared by the `acceptance` harness and the regular
//! integration tests. Each check returns an [`Outcome`] instead of
//! panicking so the harness can report every criterion.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use distok::audio::AudioBuffer;
use distok::codec::{train_codec, Codec, CodecConfig, CodecTrainConfig, Record, StreamHeader, TokenStream};
use distok::corpus::{split_held_out, tone_corpus, ToneCorpusConfig, ToneUtterance};
use distok::detector::{
    boundary_f1, contrastive_loss, find_peaks, train_detector, BoundarySet, Detector, DetectorConfig,
    DetectorTrainConfig, PeakConstraints,
};
use distok::evalkit::{bps, kmeans_silhouette, mel_error, stft_distance, stoi, tkr, Rate};
use distok::ndgrad::gradcheck::check_gradients;
use distok::ndgrad::{LogMelOp, Padding, ParamStore, Tensor};
use distok::quant::{
    compose_token, decompose_token, fit_log2_slope, fsq_quantize, rate_distortion_probe, train_group_quantizer,
    GroupQuantizer, QuantizerSpec, ScalarCodebook, Variant,
};
use distok::segmenter::{partition, reassemble, SegmentAutoencoder};
use distok::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }

    fn from_failures(failures: Vec<String>, ok: impl Into<String>) -> Self {
        if failures.is_empty() {
            Outcome::new(true, ok)
        } else {
            Outcome::new(false, failures.join("; "))
        }
    }

    pub fn error(e: impl std::fmt::Display) -> Self {
        Outcome::new(false, format!("error: {e}"))
    }

    /// Fails an otherwise passing outcome that ran over `budget`.
    pub fn within(mut self, elapsed: Duration, budget: Duration) -> Self {
        if elapsed > budget {
            self.pass = false;
            self.detail = format!("{} (took {elapsed:.1?}, budget {budget:?})", self.detail);
        }
        self
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

// criterion 1 ---------------------------------------------------------------

pub fn rate_arithmetic() -> Outcome {
    let mut f = Vec::new();
    let mut expect = |what: &str, got: Result<Rate>, want: Rate| match got {
        Ok(g) if g == want => {}
        other => f.push(format!("{what}: got {other:?}, want {want}")),
    };
    expect("50 Hz x 1024", bps(Rate::from_integer(50), &[1024]), Rate::from_integer(500));
    expect("9.5 Hz x 16 bits", bps(Rate::new(19, 2), &[1 << 16]), Rate::from_integer(152));
    expect("9.5 Hz x 4 digits of 16", bps(Rate::new(19, 2), &[16; 4]), Rate::from_integer(152));
    expect("20 Hz x 16 bits", bps(Rate::from_integer(20), &[1 << 16]), Rate::from_integer(320));
    expect("50 Hz x 8 stages", tkr(50, 8, Rate::from_integer(1)), Rate::from_integer(400));
    expect("19 segments in 2 s", tkr(19, 1, Rate::from_integer(2)), Rate::new(19, 2));
    Outcome::from_failures(f, "500, 152, 320 BPS and TKR 400 exact")
}

// criterion 2 ---------------------------------------------------------------

pub fn token_bijection() -> Outcome {
    let mut f = Vec::new();
    for c in 0..8u64.pow(3) {
        match decompose_token(c, 8, 3).and_then(|d| compose_token(&d, 8)) {
            Ok(back) if back == c => {}
            other => f.push(format!("L=8 G=3 c={c}: {other:?}")),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100_000 {
        let c = rng.random_range(0..16u64.pow(4));
        match decompose_token(c, 16, 4) {
            Ok(d) if d.iter().all(|&j| j < 16) && compose_token(&d, 16).ok() == Some(c) => {}
            other => f.push(format!("L=16 G=4 c={c}: {other:?}")),
        }
        if f.len() > 5 {
            break;
        }
    }
    Outcome::from_failures(f, "512 exhaustive + 100000 sampled tokens")
}

// criterion 3 ---------------------------------------------------------------

pub const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_H: f64 = 1e-6;
const GRAD_ABS_FLOOR: f64 = 1e-7;

fn rand_param(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::param((0..n).map(|_| scale * normal(rng)).collect(), shape)
}

fn rand_const(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| scale * normal(rng)).collect(), shape)
}

/// Weighted sum so every output element gets a distinct upstream gradient.
fn probe(y: &Tensor, seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rand_const(&mut rng, y.shape(), 1.0);
    Ok(y.mul(&w)?.sum())
}

fn gradcheck(name: &str, params: &[Tensor], f: impl Fn() -> Result<Tensor>) -> std::result::Result<(), String> {
    match check_gradients(params, f, GRAD_H, GRAD_REL_TOL, GRAD_ABS_FLOOR) {
        Ok(r) if r.passed() => Ok(()),
        Ok(r) => Err(format!("{name}: {} of {} entries off, max rel {:.2e}", r.failures, r.checked, r.max_rel_error)),
        Err(e) => Err(format!("{name}: {e}")),
    }
}

pub fn grad_conv() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let x = rand_param(&mut rng, &[2, 3, 11], 1.0);
    let w = rand_param(&mut rng, &[4, 3, 4], 0.5);
    let b = rand_param(&mut rng, &[4], 0.5);
    let pad = Padding::same_ceil(11, 4, 2);
    gradcheck("conv1d", &[x.clone(), w.clone(), b.clone()], || probe(&x.conv1d(&w, Some(&b), 2, pad)?, 1))?;
    let wt = rand_param(&mut rng, &[3, 2, 5], 0.5);
    let bt = rand_param(&mut rng, &[2], 0.5);
    gradcheck("conv_transpose1d", &[x.clone(), wt.clone(), bt.clone()], || {
        let y = x.conv_transpose1d(&wt, Some(&bt), 3)?;
        probe(&y.slice_last(1, 30)?, 2)
    })
}

pub fn grad_linear() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let x = rand_param(&mut rng, &[5, 7], 1.0);
    let w = rand_param(&mut rng, &[3, 5], 0.5);
    let b = rand_param(&mut rng, &[3], 0.5);
    gradcheck("linear", &[x.clone(), w.clone(), b.clone()], || {
        probe(&x.linear(&w, Some(&b))?.leaky_relu().tanh(), 3)
    })?;
    let g = rand_param(&mut rng, &[5], 1.0);
    let be = rand_param(&mut rng, &[5], 1.0);
    let x3 = rand_param(&mut rng, &[1, 5, 4], 1.0);
    gradcheck("layer_norm", &[x3.clone(), g.clone(), be.clone()], || {
        probe(&x3.layer_norm_channels(&g, &be)?, 4)
    })
}

pub fn grad_pool_upsample() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let x = rand_param(&mut rng, &[4, 6], 1.0);
    gradcheck("adaptive_avg_pool", &[x.clone()], || probe(&x.adaptive_avg_pool_to_1()?, 5))?;
    let c = rand_param(&mut rng, &[4, 1], 1.0);
    gradcheck("upsample_nearest", &[c.clone()], || probe(&c.upsample_nearest(7)?, 6))
}

pub fn grad_cosine_contrastive() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let a = rand_param(&mut rng, &[6, 5], 1.0);
    let b = rand_param(&mut rng, &[6, 5], 1.0);
    gradcheck("cosine_columns", &[a.clone(), b.clone()], || probe(&a.cosine_columns(&b)?, 7))?;
    let pos = rand_param(&mut rng, &[5], 0.5);
    let neg = rand_param(&mut rng, &[5, 3], 0.5);
    gradcheck("contrastive_loss", &[pos.clone(), neg.clone()], || contrastive_loss(&pos, &neg, 0.5))?;
    // end to end through a tiny detector with fixed negatives
    let cfg = DetectorConfig {
        kernel_sizes: vec![4, 3],
        strides: vec![2, 2],
        embed_dim: 3,
        proj_dim: 3,
        ..Default::default()
    };
    let det = Detector::new(&cfg, 5).map_err(|e| e.to_string())?;
    let samples: Vec<f64> = (0..40).map(|i| (i as f64 * 0.4).sin() + 0.1 * normal(&mut rng)).collect();
    let params = det.store().trainable();
    gradcheck("detector utterance loss", &params, || {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        distok::detector::utterance_loss(&det, &samples, &mut r)
    })
}

pub fn grad_segment_autoencoder() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let mut store = ParamStore::new();
    let ae = SegmentAutoencoder::new(3, 4, &mut store, "seg", &mut rng).map_err(|e| e.to_string())?;
    let seg = rand_param(&mut rng, &[3, 5], 1.0);
    let mut params = store.trainable();
    params.push(seg.clone());
    gradcheck("compress", &params, || probe(&ae.compress(&seg)?, 8))?;
    let tok = rand_param(&mut rng, &[4, 1], 1.0);
    let mut params = store.trainable();
    params.push(tok.clone());
    gradcheck("expand", &params, || probe(&ae.expand(&tok, 6)?, 9))
}

/// The straight-through estimator treats rounding as the identity. Its
/// gradient therefore equals that of the surrogate in which the rounding
/// offset is frozen at its current value, which is smooth and can be
/// checked against finite differences.
pub fn grad_gsq_straight_through() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let spec = QuantizerSpec::new(Variant::GsqManyToOne, 8, 2, 6).map_err(|e| e.to_string())?;
    let mut store = ParamStore::new();
    let q = GroupQuantizer::new(spec, &mut store, "gsq", &mut rng).map_err(|e| e.to_string())?;
    let z = rand_param(&mut rng, &[6, 4], 1.0);
    let target = rand_const(&mut rng, &[6, 4], 0.5);
    let mut params = store.trainable();
    params.push(z.clone());
    let ste_loss = || -> Result<Tensor> { q.quantize(&z)?.values.l2(&target) };
    params.iter().for_each(Tensor::zero_grad);
    ste_loss().map_err(|e| e.to_string())?.backward().map_err(|e| e.to_string())?;
    let ste_grads: Vec<Vec<f64>> = params.iter().map(|p| p.grad().unwrap_or_default()).collect();

    let (w, v): (Vec<Tensor>, Vec<Tensor>) = (0..2)
        .map(|g| {
            (
                store.get(&format!("gsq.w{g}")).unwrap().clone(),
                store.get(&format!("gsq.v{g}")).unwrap().clone(),
            )
        })
        .unzip();
    // frozen offsets round(tanh(p)) - tanh(p) at the current parameters
    let offsets: Vec<Tensor> = (0..2)
        .map(|g| {
            let p = w[g].matmul(&z.slice_rows(3 * g, 3 * g + 3).unwrap()).unwrap();
            let b = p.tanh().to_vec();
            let (hat, _) = fsq_quantize(&p.to_vec(), 8).unwrap();
            Tensor::new(hat.iter().zip(&b).map(|(h, t)| h - t).collect(), &[1, 4])
        })
        .collect();
    let surrogate = || -> Result<Tensor> {
        let parts = (0..2)
            .map(|g| {
                let p = w[g].matmul(&z.slice_rows(3 * g, 3 * g + 3)?)?;
                v[g].matmul(&p.tanh().add(&offsets[g])?)
            })
            .collect::<Result<Vec<_>>>()?;
        Tensor::concat_rows(&parts)?.l2(&target)
    };
    let s = surrogate().map_err(|e| e.to_string())?.item();
    let t = ste_loss().map_err(|e| e.to_string())?.item();
    if (s - t).abs() > 1e-12 {
        return Err(format!("gsq surrogate value {s} differs from forward {t}"));
    }
    params.iter().for_each(Tensor::zero_grad);
    surrogate().map_err(|e| e.to_string())?.backward().map_err(|e| e.to_string())?;
    for (p, ste) in params.iter().zip(&ste_grads) {
        let sur = p.grad().unwrap_or_default();
        if sur.iter().zip(ste).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
            return Err("gsq straight-through gradient differs from frozen-offset surrogate".into());
        }
    }
    gradcheck("gsq surrogate", &params, surrogate)
}

pub fn grad_log_mel() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let x = rand_param(&mut rng, &[120], 0.3);
    let op = LogMelOp::new(16000, 64, 16, 8).map_err(|e| e.to_string())?;
    gradcheck("log_mel", &[x.clone()], || probe(&op.forward(&x)?, 10))
}

pub fn gradient_checks() -> Outcome {
    let checks: [fn() -> std::result::Result<(), String>; 7] = [
        grad_conv,
        grad_linear,
        grad_pool_upsample,
        grad_cosine_contrastive,
        grad_segment_autoencoder,
        grad_gsq_straight_through,
        grad_log_mel,
    ];
    let f: Vec<String> = checks.iter().filter_map(|c| c().err()).collect();
    Outcome::from_failures(f, format!("{} block groups within rel {GRAD_REL_TOL:e}", checks.len()))
}

// criterion 4 ---------------------------------------------------------------

/// Peaks by the definition: an interior run of equal values with strictly
/// lower neighbours, reported at its middle (rounded down), whose
/// prominence (height above the higher of the two lowest points reached
/// before meeting strictly higher ground) meets `min_prom`.
pub fn brute_force_peaks(x: &[f64], min_prom: f64) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut l = 1;
    while l + 1 < n {
        let mut r = l;
        while r + 1 < n && x[r + 1] == x[l] {
            r += 1;
        }
        if r + 1 < n && x[l - 1] < x[l] && x[r + 1] < x[l] {
            let p = (l + r) / 2;
            let h = x[p];
            let left = (0..=p).rev().take_while(|&j| x[j] <= h).map(|j| x[j]).fold(h, f64::min);
            let right = (p..n).take_while(|&j| x[j] <= h).map(|j| x[j]).fold(h, f64::min);
            if h - left.max(right) >= min_prom {
                out.push(p);
            }
        }
        l = r + 1;
    }
    out
}

pub fn peak_oracle(traces: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut f = Vec::new();
    let mut total = 0;
    for i in 0..traces {
        let len = rng.random_range(0..=64);
        // coarse values on half the traces so plateaus and ties occur
        let coarse = i % 2 == 0;
        let x: Vec<f64> = (0..len)
            .map(|_| if coarse { rng.random_range(0..5) as f64 / 4.0 } else { rng.random::<f64>() })
            .collect();
        let prom = [0.0, 0.01, 0.1, 0.3][i % 4];
        let c = PeakConstraints {
            prominence: Some(prom),
            ..Default::default()
        };
        let got = find_peaks(&x, &c);
        let want = brute_force_peaks(&x, prom);
        total += want.len();
        if got != want && f.len() < 3 {
            f.push(format!("trace {i} {x:?} prom {prom}: got {got:?}, want {want:?}"));
        }
    }
    Outcome::from_failures(f, format!("{traces} traces, {total} peaks identical"))
}

// criterion 5 ---------------------------------------------------------------

pub fn tiling(cases: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut f = Vec::new();
    for i in 0..cases {
        let t = rng.random_range(1..=256);
        let d = rng.random_range(1..=4);
        let x = Tensor::new((0..d * t).map(|_| normal(&mut rng)).collect(), &[d, t]);
        let k = rng.random_range(0..t);
        let mut b: Vec<usize> = (0..k).map(|_| rng.random_range(1..t.max(2))).filter(|&v| v < t).collect();
        b.sort_unstable();
        b.dedup();
        let bs = BoundarySet::new(b.clone(), t).expect("valid boundary set");
        let check = || -> Result<bool> {
            let (segs, layout) = partition(&x, &bs)?;
            let ok_lengths = segs.len() == b.len() + 1 && layout.lengths().iter().sum::<usize>() == t;
            let back = reassemble(&segs, &layout)?;
            Ok(ok_lengths && back.shape() == x.shape() && back.to_vec() == x.to_vec())
        };
        match check() {
            Ok(true) => {}
            Ok(false) => f.push(format!("case {i}: T={t} boundaries {b:?} not reproduced")),
            Err(e) => f.push(format!("case {i}: {e}")),
        }
        if f.len() > 3 {
            break;
        }
    }
    Outcome::from_failures(f, format!("{cases} random partitions round-trip exactly"))
}

// criterion 6 ---------------------------------------------------------------

pub fn rate_distortion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rates: Vec<u32> = (2..=8).collect();
    let pts = rate_distortion_probe(
        &mut |r: &mut ChaCha8Rng| vec![r.random::<f64>()],
        &|rate, x| vec![ScalarCodebook::uniform(0.0, 1.0, 1 << rate).quantize(x[0])],
        &rates,
        200_000,
        &mut rng,
    );
    let slope = fit_log2_slope(&pts).unwrap_or(f64::NAN);
    let slope_ok = (-2.15..=-1.85).contains(&slope);

    // bimodal: tight modes at +-0.7; at 1 bit a mode-aligned codebook sits
    // on the modes while the uniform grid does not
    let sample = |r: &mut ChaCha8Rng| {
        let m = if r.random::<bool>() { 0.7 } else { -0.7 };
        vec![m + 0.05 * normal(r)]
    };
    let mut bimodal_ok = true;
    let mut notes = Vec::new();
    for rate in [1u32, 2, 3] {
        let n = 1usize << rate;
        let half = n / 2;
        let aligned: Vec<f64> = (0..half)
            .flat_map(|i| {
                let off = if half == 1 { 0.0 } else { -0.1 + 0.2 * i as f64 / (half - 1) as f64 };
                [0.7 + off, -0.7 + off]
            })
            .collect();
        let aligned = ScalarCodebook::from_points(aligned);
        let uniform = ScalarCodebook::uniform(-1.0, 1.0, n);
        let mut r1 = ChaCha8Rng::seed_from_u64(60 + rate as u64);
        let mut r2 = ChaCha8Rng::seed_from_u64(60 + rate as u64);
        let da = rate_distortion_probe(&mut |r: &mut ChaCha8Rng| sample(r), &|_, x| vec![aligned.quantize(x[0])], &[rate], 50_000, &mut r1)[0].distortion;
        let du = rate_distortion_probe(&mut |r: &mut ChaCha8Rng| sample(r), &|_, x| vec![uniform.quantize(x[0])], &[rate], 50_000, &mut r2)[0].distortion;
        bimodal_ok &= da < du;
        notes.push(format!("R={rate}: {da:.2e} < {du:.2e}"));
    }
    let detail = format!("uniform slope {slope:.3}; bimodal {}", notes.join(", "));
    Outcome::new(slope_ok && bimodal_ok, detail)
}

// criteria 7 and 8 ----------------------------------------------------------

pub struct ToneSplit {
    pub train: Vec<ToneUtterance>,
    pub held_out: Vec<ToneUtterance>,
}

impl ToneSplit {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        let utts = tone_corpus(&ToneCorpusConfig::default(), n, seed)?;
        let (held_out, train) = {
            let (t, h) = split_held_out(&utts, 5);
            (h, t)
        };
        Ok(ToneSplit { train, held_out })
    }

    fn samples(u: &[ToneUtterance]) -> Vec<Vec<f64>> {
        u.iter().map(|u| u.audio.samples().to_vec()).collect()
    }

    pub fn train_samples(&self) -> Vec<Vec<f64>> {
        Self::samples(&self.train)
    }

    pub fn held_out_samples(&self) -> Vec<Vec<f64>> {
        Self::samples(&self.held_out)
    }
}

pub const TONE_UTTERANCES: usize = 40;
pub const TONE_SEED: u64 = 7;
pub const TRAIN_SEED: u64 = 42;

pub fn detector_training(split: &ToneSplit) -> (Outcome, Option<Detector>) {
    let tcfg = DetectorTrainConfig {
        steps: 200,
        ..Default::default()
    };
    let trained = match train_detector(
        &DetectorConfig::default(),
        &tcfg,
        &split.train_samples(),
        &split.held_out_samples(),
        TRAIN_SEED,
    ) {
        Ok(t) => t,
        Err(e) => return (Outcome::error(e), None),
    };
    let (Some(init), Some(last)) = (trained.initial_held_out(), trained.final_held_out()) else {
        return (Outcome::new(false, "no held-out loss recorded"), None);
    };
    let mut f1 = Vec::new();
    for u in &split.held_out {
        match trained.detector.detect(u.audio.samples()) {
            Ok(b) => f1.push(boundary_f1(&b, &u.boundary_frames, 2)),
            Err(e) => return (Outcome::error(e), None),
        }
    }
    let mean_f1 = f1.iter().sum::<f64>() / f1.len() as f64;
    let ratio = last / init;
    let pass = ratio < 0.9 && mean_f1 >= 0.9;
    (
        Outcome::new(
            pass,
            format!("held-out loss {init:.4} -> {last:.4} (x{ratio:.3}), boundary F1 {mean_f1:.3} at +-2 frames"),
        ),
        Some(trained.detector),
    )
}

pub fn codec_training(split: &ToneSplit, detector: &Detector) -> Outcome {
    let cfg = CodecConfig::default();
    let tcfg = CodecTrainConfig::default();
    let trained = match train_codec(
        &cfg,
        &tcfg,
        detector,
        &split.train_samples(),
        &split.held_out_samples(),
        TRAIN_SEED,
    ) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    let (Some(init), Some(last)) = (trained.initial_held_out(), trained.final_held_out()) else {
        return Outcome::new(false, "no held-out loss recorded");
    };
    let untrained = match Codec::new(&cfg, TRAIN_SEED) {
        Ok(c) => c,
        Err(e) => return Outcome::error(e),
    };
    let mut worse = Vec::new();
    let mut pairs = Vec::new();
    for (i, u) in split.held_out.iter().enumerate() {
        let score = |c: &Codec| -> Result<f64> { mel_error(&u.audio, &c.reconstruct(detector, &u.audio)?) };
        match (score(&trained.codec), score(&untrained)) {
            (Ok(a), Ok(b)) => {
                if !(a < b) {
                    worse.push(i);
                }
                pairs.push((a, b));
            }
            (Err(e), _) | (_, Err(e)) => return Outcome::error(e),
        }
    }
    let ratio = last / init;
    let mean = |k: fn(&(f64, f64)) -> f64| pairs.iter().map(k).sum::<f64>() / pairs.len() as f64;
    Outcome::new(
        ratio < 0.7 && worse.is_empty(),
        format!(
            "held-out loss {init:.1} -> {last:.1} (x{ratio:.3}); mean mel error trained {:.3} vs untrained {:.3}, better on {}/{}",
            mean(|p| p.0),
            mean(|p| p.1),
            pairs.len() - worse.len(),
            pairs.len()
        ),
    )
}

// criterion 9 ---------------------------------------------------------------

/// Four clusters spread along one shared direction in `R^8`.
pub fn cluster_latents(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: Vec<f64> = {
        let d: Vec<f64> = (0..8).map(|_| normal(&mut rng)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.into_iter().map(|v| v / norm).collect()
    };
    let amps = [-0.6, -0.2, 0.2, 0.6];
    (0..n)
        .map(|i| {
            let a = amps[i % 4];
            dir.iter().map(|d| a * d * 8f64.sqrt() + 0.03 * normal(&mut rng)).collect()
        })
        .collect()
}

fn mean_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n: usize = a.iter().map(Vec::len).sum();
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2))).sum::<f64>() / n as f64
}

pub fn gsq_vs_fsq() -> Outcome {
    let run = || -> Result<Outcome> {
        let data = cluster_latents(800, 9);
        let gsq_spec = QuantizerSpec::new(Variant::GsqManyToOne, 4, 4, 8)?;
        let fsq_spec = QuantizerSpec::new(Variant::Fsq, 2, 1, 8)?;
        let budget = (gsq_spec.bits_per_token(), fsq_spec.bits_per_token());
        let (_, gsq) = train_group_quantizer(&data, gsq_spec, 400, 1e-2, 42)?;
        let params = gsq.params();
        let gsq_out: Vec<Vec<f64>> = data
            .iter()
            .map(|z| distok::quant::gsq_many_to_one(z, &gsq_spec, &params).map(|r| r.0))
            .collect::<Result<_>>()?;
        let fsq_out: Vec<Vec<f64>> = data.iter().map(|z| fsq_quantize(z, 2).map(|r| r.0)).collect::<Result<_>>()?;
        let (dg, df) = (mean_sq(&data, &gsq_out), mean_sq(&data, &fsq_out));
        let sg = kmeans_silhouette(&gsq_out, 4, 30, 42, 500)?.silhouette;
        let sf = kmeans_silhouette(&fsq_out, 4, 30, 42, 500)?.silhouette;
        Ok(Outcome::new(
            budget.0 == budget.1 && dg <= df && sg >= sf,
            format!(
                "{} vs {} bits; distortion gsq {dg:.4} vs fsq {df:.4}; silhouette gsq {sg:.3} vs fsq {sf:.3}",
                budget.0, budget.1
            ),
        ))
    };
    run().unwrap_or_else(Outcome::error)
}

// criterion 10 --------------------------------------------------------------

pub fn small_codec_config() -> CodecConfig {
    CodecConfig {
        strides: vec![4, 4],
        base_channels: 2,
        latent_dim: 4,
        feature_dim: 4,
        hidden: 4,
        groups: 2,
        levels: 16,
        ..Default::default()
    }
}

pub fn random_stream(codec: &Codec, rng: &mut ChaCha8Rng) -> TokenStream {
    let ratio = codec.downsample_ratio() as u64;
    let frames = rng.random_range(0..=40u64);
    let samples = if frames == 0 { 0 } else { (frames - 1) * ratio + rng.random_range(1..=ratio) };
    let mut records = Vec::new();
    let mut left = frames;
    let bound = codec.config().quantizer_spec().vocab_size().unwrap();
    while left > 0 {
        // occasionally long runs so multi-byte varints appear
        let cap = if rng.random::<f64>() < 0.1 { 200 } else { 6 };
        let len = rng.random_range(1..=left.min(cap));
        records.push(Record {
            length: len,
            token: rng.random_range(0..bound),
        });
        left -= len;
    }
    let header = StreamHeader {
        utterance_sample_count: samples,
        ..codec.header(0)
    };
    TokenStream::new(header, records).expect("generated stream is valid")
}

pub fn bitstream_robustness(n: usize) -> Outcome {
    let codec = match Codec::new(&small_codec_config(), 1) {
        Ok(c) => c,
        Err(e) => return Outcome::error(e),
    };
    let bound = codec.config().quantizer_spec().vocab_size().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut f = Vec::new();
    for i in 0..n {
        let s = random_stream(&codec, &mut rng);
        let bytes = s.to_bytes();
        match TokenStream::from_bytes(&bytes) {
            Ok(back) if back == s && back.to_bytes() == bytes => {}
            other => f.push(format!("stream {i} did not round-trip: {other:?}")),
        }
    }
    let (mut rejected, mut decoded) = (0, 0);
    for i in 0..n {
        let s = random_stream(&codec, &mut rng);
        let mut bytes = s.to_bytes();
        let at = rng.random_range(0..bytes.len());
        let old = bytes[at];
        bytes[at] = loop {
            let b: u8 = rng.random();
            if b != old {
                break b;
            }
        };
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| -> std::result::Result<bool, String> {
            let Ok(parsed) = TokenStream::from_bytes(&bytes) else {
                return Ok(false);
            };
            if parsed.records.iter().any(|r| r.token >= bound && parsed.header.token_bound().is_some_and(|b| b <= bound)) {
                return Err("out-of-range token accepted".into());
            }
            match codec.decode(&parsed) {
                Ok(audio) if audio.len() as u64 == parsed.header.utterance_sample_count => Ok(true),
                Ok(audio) => Err(format!("decoded {} samples, header says {}", audio.len(), parsed.header.utterance_sample_count)),
                Err(_) => Ok(false),
            }
        }));
        match outcome {
            Ok(Ok(true)) => decoded += 1,
            Ok(Ok(false)) => rejected += 1,
            Ok(Err(e)) => f.push(format!("corruption {i} at byte {at}: {e}")),
            Err(_) => f.push(format!("corruption {i} at byte {at}: panic")),
        }
    }
    Outcome::from_failures(
        f,
        format!("{n} streams bit-exact; {n} corruptions: {rejected} rejected, {decoded} decoded length-consistent"),
    )
}

// criterion 11 --------------------------------------------------------------

/// Harmonic tone with syllable-rate amplitude modulation.
pub fn speechlike(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let t = i as f64 / 16000.0;
            let env = 0.5 + 0.5 * (2.0 * PI * 4.0 * t).sin() * (2.0 * PI * 1.3 * t).cos();
            let f0 = 140.0 + 30.0 * (2.0 * PI * 0.7 * t).sin();
            let voiced: f64 = (1..8).map(|h| (2.0 * PI * f0 * h as f64 * t).sin() / h as f64).sum();
            env * (0.3 * voiced + 0.02 * normal(&mut rng))
        })
        .collect()
}

pub fn metric_sanity() -> Outcome {
    let run = || -> Result<Outcome> {
        let clean = AudioBuffer::new(speechlike(32000, 11), 16000)?;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let noise = AudioBuffer::new((0..32000).map(|_| 0.2 * normal(&mut rng)).collect(), 16000)?;
        let me = mel_error(&clean, &clean)?;
        let sd = stft_distance(&clean, &clean)?;
        let same = stoi(&clean, &clean)?;
        let vs_noise = stoi(&clean, &noise)?;
        Ok(Outcome::new(
            me == 0.0 && sd == 0.0 && same >= 0.99 && vs_noise < 0.2,
            format!("mel_error {me}, stft_distance {sd}, stoi identical {same:.4}, vs noise {vs_noise:.4}"),
        ))
    };
    run().unwrap_or_else(Outcome::error)
}

pub fn timed(f: impl FnOnce() -> Outcome, budget: Duration) -> Outcome {
    let t0 = Instant::now();
    let out = f();
    out.within(t0.elapsed(), budget)
}
