//! Short-time Fourier transform and log-mel spectrograms.
//!
//! Frames are centred: the signal is reflection-padded by `window / 2` on
//! both sides (zero-padded when it is too short to reflect), so a signal of
//! `n` samples yields `floor((n + 2 * (window / 2) - window) / hop) + 1`
//! frames. The window is a periodic Hann window of the full FFT length.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Floor added before the log in log-mel spectrograms.
pub const LOG_MEL_FLOOR: f64 = 1e-5;

/// Time x frequency magnitudes, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub hop: usize,
    pub window: usize,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.magnitudes[t * self.n_bins..(t + 1) * self.n_bins]
    }
}

/// Time x mel log-energies, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Vec<f64>,
    pub n_frames: usize,
    pub n_mels: usize,
    pub hop: usize,
    pub n_fft: usize,
}

pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Cached FFT plan, window and padding rule for one `(n_fft, hop)` pair.
#[derive(Clone)]
pub struct StftPlan {
    pub n_fft: usize,
    pub hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan")
            .field("n_fft", &self.n_fft)
            .field("hop", &self.hop)
            .finish()
    }
}

impl StftPlan {
    pub fn new(n_fft: usize, hop: usize) -> Result<Self> {
        if hop == 0 || n_fft < hop {
            return Err(Error::InvalidArgument(format!(
                "stft needs window >= hop > 0, got window {n_fft} hop {hop}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(StftPlan {
            n_fft,
            hop,
            window: hann_window(n_fft),
            fft: planner.plan_fft_forward(n_fft),
            ifft: planner.plan_fft_inverse(n_fft),
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    fn pad(&self) -> usize {
        self.n_fft / 2
    }

    pub fn n_frames(&self, len: usize) -> usize {
        (len + 2 * self.pad() - self.n_fft) / self.hop + 1
    }

    /// Source sample feeding padded position `p`, if any. Reflection when
    /// the signal is longer than the pad, zeros otherwise.
    pub fn source_index(&self, p: usize, len: usize) -> Option<usize> {
        let pad = self.pad();
        let i = p as isize - pad as isize;
        let n = len as isize;
        if (0..n).contains(&i) {
            return Some(i as usize);
        }
        if len <= pad {
            return None;
        }
        let r = if i < 0 { -i } else { 2 * (n - 1) - i };
        (0..n).contains(&r).then_some(r as usize)
    }

    /// Windowed frame `t` of `signal` (before the FFT).
    pub fn windowed_frame(&self, signal: &[f64], t: usize) -> Vec<f64> {
        let start = t * self.hop;
        (0..self.n_fft)
            .map(|k| {
                self.source_index(start + k, signal.len())
                    .map_or(0.0, |i| signal[i] * self.window[k])
            })
            .collect()
    }

    /// One-sided complex spectra, `n_frames x n_bins`.
    pub fn analyze(&self, signal: &[f64]) -> Vec<Complex<f64>> {
        let n_frames = self.n_frames(signal.len());
        let bins = self.n_bins();
        let mut out = Vec::with_capacity(n_frames * bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        for t in 0..n_frames {
            for (b, v) in buf.iter_mut().zip(self.windowed_frame(signal, t)) {
                *b = Complex::new(v, 0.0);
            }
            self.fft.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        out
    }

    /// Gradient of `sum_{t,k} g[t,k] * |X[t,k]|^2` with respect to the
    /// signal, given the forward spectra `spec` from [`StftPlan::analyze`].
    pub(crate) fn power_backward(&self, spec: &[Complex<f64>], g: &[f64], len: usize) -> Vec<f64> {
        let bins = self.n_bins();
        let n_frames = spec.len() / bins;
        let mut grad = vec![0.0; len];
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        for t in 0..n_frames {
            buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
            for k in 0..bins {
                buf[k] = spec[t * bins + k] * g[t * bins + k];
            }
            // sum_k g_k X_k e^{+2 pi i k n / N}
            self.ifft.process(&mut buf);
            let start = t * self.hop;
            for (n, b) in buf.iter().enumerate() {
                if let Some(i) = self.source_index(start + n, len) {
                    grad[i] += 2.0 * self.window[n] * b.re;
                }
            }
        }
        grad
    }
}

/// Hann-windowed magnitude STFT with `window_len / 2 + 1` bins.
pub fn stft_magnitude(buffer: &AudioBuffer, window_len: usize, hop: usize) -> Result<Spectrogram> {
    let plan = StftPlan::new(window_len, hop)?;
    let spec = plan.analyze(buffer.samples());
    Ok(Spectrogram {
        magnitudes: spec.iter().map(|c| c.norm()).collect(),
        n_frames: plan.n_frames(buffer.len()),
        n_bins: plan.n_bins(),
        hop,
        window: window_len,
    })
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filters between 0 Hz and Nyquist, stored
/// `n_mels x n_bins`. Filters are not area-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    pub weights: Vec<f64>,
}

impl MelFilterbank {
    /// A filter too narrow to cover any FFT bin is given unit weight on the
    /// bin nearest its centre, so every band sees some energy.
    pub fn new(sample_rate: u32, n_fft: usize, n_mels: usize) -> Result<Self> {
        let n_bins = n_fft / 2 + 1;
        if n_mels == 0 || n_mels >= n_bins {
            return Err(Error::InvalidArgument(format!(
                "n_mels must be in 1..{n_bins}, got {n_mels}"
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let up = (f - lo) / (mid - lo);
                let down = (hi - f) / (hi - mid);
                *w = up.min(down).max(0.0);
            }
            if row.iter().all(|&w| w == 0.0) {
                let nearest = ((mid / bin_hz).round() as usize).min(n_bins - 1);
                row[nearest] = 1.0;
            }
        }
        Ok(MelFilterbank {
            n_mels,
            n_bins,
            weights,
        })
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Mel energies of one power-spectrum frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        (0..self.n_mels)
            .map(|m| self.row(m).iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// `log(1e-5 + mel(|STFT|^2))`.
pub fn mel_spectrogram(buffer: &AudioBuffer, n_fft: usize, hop: usize, n_mels: usize) -> Result<MelSpectrogram> {
    let plan = StftPlan::new(n_fft, hop)?;
    let bank = MelFilterbank::new(buffer.sample_rate(), n_fft, n_mels)?;
    Ok(log_mel_with(&plan, &bank, buffer.samples()))
}

pub(crate) fn log_mel_with(plan: &StftPlan, bank: &MelFilterbank, signal: &[f64]) -> MelSpectrogram {
    let spec = plan.analyze(signal);
    let bins = plan.n_bins();
    let n_frames = spec.len() / bins;
    let mut values = Vec::with_capacity(n_frames * bank.n_mels);
    for t in 0..n_frames {
        let power: Vec<f64> = spec[t * bins..(t + 1) * bins].iter().map(|c| c.norm_sqr()).collect();
        values.extend(bank.apply(&power).into_iter().map(|e| (LOG_MEL_FLOOR + e).ln()));
    }
    MelSpectrogram {
        values,
        n_frames,
        n_mels: bank.n_mels,
        hop: plan.hop,
        n_fft: plan.n_fft,
    }
}
