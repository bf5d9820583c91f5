//! Short-time objective intelligibility, following the 2011 reference
//! algorithm: 10 kHz analysis, 256-sample Hann frames, 15 one-third octave
//! bands from 150 Hz, 30-frame segments, -15 dB clipping and 40 dB
//! silent-frame removal.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub const STOI_RATE: u32 = 10_000;
const FRAME: usize = 256;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;
const SINC_HALF_WIDTH: f64 = 32.0;

/// Band-limited resampling with a Blackman-windowed sinc kernel.
pub fn resample_sinc(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to {
        return x.to_vec();
    }
    let ratio = from as f64 / to as f64;
    // cutoff in cycles per input sample
    let fc = 0.5 * (to as f64 / from as f64).min(1.0);
    let half = SINC_HALF_WIDTH / (2.0 * fc);
    let n_out = ((x.len() as u64 * to as u64).div_ceil(from as u64)) as usize;
    (0..n_out)
        .map(|m| {
            let t = m as f64 * ratio;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(x.len().saturating_sub(1));
            (lo..=hi)
                .map(|n| {
                    let d = t - n as f64;
                    let s = if d == 0.0 { 1.0 } else { (2.0 * PI * fc * d).sin() / (PI * d) / (2.0 * fc) };
                    let u = (d / half + 1.0) / 2.0;
                    let w = 0.42 - 0.5 * (2.0 * PI * u).cos() + 0.08 * (4.0 * PI * u).cos();
                    2.0 * fc * s * w * x[n]
                })
                .sum()
        })
        .collect()
}

/// `numpy.hanning(n + 2)[1:-1]`.
fn inner_hann(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n + 1) as f64).cos()).collect()
}

/// Frame start offsets `0, hop, ...` strictly below `len - frame`.
fn frame_starts(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(frame)).step_by(hop)
}

/// One-third octave band matrix, `BANDS x (NFFT/2 + 1)` of zeros and ones.
fn third_octave_bands() -> Vec<Vec<f64>> {
    let bins = NFFT / 2 + 1;
    let f: Vec<f64> = (0..bins).map(|k| k as f64 * STOI_RATE as f64 / NFFT as f64).collect();
    let nearest = |target: f64| {
        let mut best = 0;
        for (i, v) in f.iter().enumerate() {
            if (v - target).powi(2) < (f[best] - target).powi(2) {
                best = i;
            }
        }
        best
    };
    (0..BANDS)
        .map(|k| {
            let lo = MIN_FREQ * 2f64.powf((2.0 * k as f64 - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k as f64 + 1.0) / 6.0);
            let (a, b) = (nearest(lo), nearest(hi));
            (0..bins).map(|i| if i >= a && i < b { 1.0 } else { 0.0 }).collect()
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Drops frames more than 40 dB below the loudest clean frame from both
/// signals and overlap-adds the survivors.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hop = FRAME / 2;
    let w = inner_hann(FRAME);
    let frames = |s: &[f64]| -> Vec<Vec<f64>> {
        frame_starts(s.len(), FRAME, hop)
            .map(|i| s[i..i + FRAME].iter().zip(&w).map(|(a, b)| a * b).collect())
            .collect()
    };
    let (xf, yf) = (frames(x), frames(y));
    let energy: Vec<f64> = xf.iter().map(|f| 20.0 * (norm(f) + EPS).log10()).collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..xf.len()).filter(|&i| max - DYN_RANGE_DB - energy[i] < 0.0).collect();
    let ola = |fr: &[Vec<f64>]| -> Vec<f64> {
        if keep.is_empty() {
            return vec![];
        }
        let mut out = vec![0.0; (keep.len() - 1) * hop + FRAME];
        for (j, &i) in keep.iter().enumerate() {
            for (o, v) in out[j * hop..j * hop + FRAME].iter_mut().zip(&fr[i]) {
                *o += v;
            }
        }
        out
    };
    (ola(&xf), ola(&yf))
}

/// Band envelopes `BANDS x frames`.
fn band_envelopes(s: &[f64], fft: &Arc<dyn Fft<f64>>, bands: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let w = inner_hann(FRAME);
    let bins = NFFT / 2 + 1;
    let mut env = vec![Vec::new(); BANDS];
    let mut buf = vec![Complex::new(0.0, 0.0); NFFT];
    for i in frame_starts(s.len(), FRAME, FRAME / 2) {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (j, c) in buf.iter_mut().take(FRAME).enumerate() {
            c.re = s[i + j] * w[j];
        }
        fft.process(&mut buf);
        for (band, out) in bands.iter().zip(env.iter_mut()) {
            let e: f64 = (0..bins).map(|k| band[k] * buf[k].norm_sqr()).sum();
            out.push(e.sqrt());
        }
    }
    env
}

/// Intelligibility of `degraded` relative to `clean`, both at the same
/// rate and length. Errors when fewer than 30 analysis frames remain after
/// silence removal (roughly 0.4 s of active signal).
pub fn stoi(clean: &AudioBuffer, degraded: &AudioBuffer) -> Result<f64> {
    if clean.len() != degraded.len() || clean.sample_rate() != degraded.sample_rate() {
        return Err(Error::InvalidArgument("stoi inputs must share length and sample rate".into()));
    }
    let x = resample_sinc(clean.samples(), clean.sample_rate(), STOI_RATE);
    let y = resample_sinc(degraded.samples(), degraded.sample_rate(), STOI_RATE);
    let (x, y) = remove_silent_frames(&x, &y);
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let bands = third_octave_bands();
    let xe = band_envelopes(&x, &fft, &bands);
    let ye = band_envelopes(&y, &fft, &bands);
    let frames = xe[0].len();
    if frames < SEGMENT {
        return Err(Error::AudioTooShort {
            got: frames,
            need: SEGMENT,
        });
    }
    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let n_segments = frames - SEGMENT + 1;
    for m in SEGMENT..=frames {
        for (xb, yb) in xe.iter().zip(&ye) {
            let xs = &xb[m - SEGMENT..m];
            let ys = &yb[m - SEGMENT..m];
            let scale = norm(xs) / (norm(ys) + EPS);
            let yp: Vec<f64> = ys.iter().zip(xs).map(|(y, x)| (y * scale).min(x * clip)).collect();
            let center = |v: &[f64]| -> Vec<f64> {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let c: Vec<f64> = v.iter().map(|a| a - mean).collect();
                let n = norm(&c) + EPS;
                c.into_iter().map(|a| a / n).collect()
            };
            let (xc, yc) = (center(xs), center(&yp));
            total += xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(total / (BANDS * n_segments) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Amplitude-modulated harmonic signal with speech-like envelopes.
    fn speechlike(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = || Distribution::<f64>::sample(&StandardNormal, &mut rng);
        (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                let env = 0.5 + 0.5 * (2.0 * PI * 4.0 * t).sin() * (2.0 * PI * 1.3 * t).cos();
                let f0 = 140.0 + 30.0 * (2.0 * PI * 0.7 * t).sin();
                let voiced: f64 = (1..8).map(|h| (2.0 * PI * f0 * h as f64 * t).sin() / h as f64).sum();
                env * (0.3 * voiced + 0.02 * noise())
            })
            .collect()
    }

    fn white(n: usize, seed: u64, scale: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect::<Vec<f64>>()
    }

    fn buf(v: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(v, 16000).unwrap()
    }

    fn power(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
    }

    fn at_snr(clean: &[f64], noise: &[f64], db: f64) -> Vec<f64> {
        let g = (power(clean) / power(noise) / 10f64.powf(db / 10.0)).sqrt();
        clean.iter().zip(noise).map(|(c, n)| c + g * n).collect()
    }

    #[test]
    fn identical_signals_score_one() {
        let x = buf(speechlike(24000, 1));
        let s = stoi(&x, &x).unwrap();
        assert!(s >= 0.99 && s <= 1.0 + 1e-12, "{s}");
    }

    #[test]
    fn independent_noise_scores_low() {
        let x = buf(speechlike(32000, 2));
        let n = buf(white(32000, 3, 0.2));
        let s = stoi(&x, &n).unwrap();
        assert!(s < 0.2, "{s}");
    }

    #[test]
    fn monotone_in_snr() {
        let x = speechlike(32000, 4);
        let n = white(32000, 5, 1.0);
        let hi = stoi(&buf(x.clone()), &buf(at_snr(&x, &n, 20.0))).unwrap();
        let lo = stoi(&buf(x.clone()), &buf(at_snr(&x, &n, 0.0))).unwrap();
        assert!(hi > lo, "{hi} <= {lo}");
    }

    #[test]
    fn short_input_is_rejected() {
        let x = buf(speechlike(4000, 6));
        assert!(matches!(stoi(&x, &x), Err(Error::AudioTooShort { .. })));
        assert!(stoi(&x, &buf(vec![0.0; 10])).is_err());
    }

    #[test]
    fn band_matrix_matches_reference_layout() {
        let b = third_octave_bands();
        // 133.6-168.4 Hz and 3394-4276 Hz on a 19.53 Hz bin grid
        let span = |row: &[f64]| {
            let on: Vec<usize> = row.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, _)| i).collect();
            (on[0], *on.last().unwrap())
        };
        assert_eq!(span(&b[0]), (7, 8));
        assert_eq!(span(&b[14]), (174, 218));
    }

    #[test]
    fn resampler_keeps_in_band_tones() {
        let x: Vec<f64> = (0..16000).map(|i| (2.0 * PI * 1000.0 * i as f64 / 16000.0).sin()).collect();
        let y = resample_sinc(&x, 16000, 10000);
        assert_eq!(y.len(), 10000);
        for (m, v) in y.iter().enumerate().skip(100).take(9800) {
            let want = (2.0 * PI * 1000.0 * m as f64 / 10000.0).sin();
            assert!((v - want).abs() < 1e-3, "sample {m}: {v} vs {want}");
        }
    }
}
