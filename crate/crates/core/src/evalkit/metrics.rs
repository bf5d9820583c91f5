use crate::audio::{mel_spectrogram, stft_magnitude, AudioBuffer};
use crate::error::{Error, Result};

pub const MEL_ERROR_FFT: usize = 1024;
pub const MEL_ERROR_HOP: usize = 256;
pub const MEL_ERROR_MELS: usize = 80;
pub const STFT_DISTANCE_FFTS: [usize; 3] = [512, 1024, 2048];
const LOG_MAG_FLOOR: f64 = 1e-5;

fn check_pair(x: &AudioBuffer, y: &AudioBuffer) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "signals differ in length: {} vs {} samples",
            x.len(),
            y.len()
        )));
    }
    if x.sample_rate() != y.sample_rate() {
        return Err(Error::InvalidArgument(format!(
            "signals differ in sample rate: {} vs {} Hz",
            x.sample_rate(),
            y.sample_rate()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("signals are empty".into()));
    }
    Ok(())
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64
}

/// Mean absolute difference of log-mel spectrograms (1024-point FFT, hop
/// 256, 80 mels).
pub fn mel_error(x: &AudioBuffer, y: &AudioBuffer) -> Result<f64> {
    check_pair(x, y)?;
    let a = mel_spectrogram(x, MEL_ERROR_FFT, MEL_ERROR_HOP, MEL_ERROR_MELS)?;
    let b = mel_spectrogram(y, MEL_ERROR_FFT, MEL_ERROR_HOP, MEL_ERROR_MELS)?;
    Ok(mean_abs_diff(&a.values, &b.values))
}

/// One resolution of [`stft_distance`]: mean absolute magnitude difference
/// plus mean absolute log-magnitude difference.
pub fn stft_distance_term(x: &AudioBuffer, y: &AudioBuffer, n_fft: usize) -> Result<f64> {
    check_pair(x, y)?;
    let a = stft_magnitude(x, n_fft, n_fft / 4)?;
    let b = stft_magnitude(y, n_fft, n_fft / 4)?;
    let lin = mean_abs_diff(&a.magnitudes, &b.magnitudes);
    let log = a
        .magnitudes
        .iter()
        .zip(&b.magnitudes)
        .map(|(p, q)| ((LOG_MAG_FLOOR + p).ln() - (LOG_MAG_FLOOR + q).ln()).abs())
        .sum::<f64>()
        / a.magnitudes.len() as f64;
    Ok(lin + log)
}

/// Mean of [`stft_distance_term`] over 512, 1024 and 2048-point FFTs.
pub fn stft_distance(x: &AudioBuffer, y: &AudioBuffer) -> Result<f64> {
    let mut total = 0.0;
    for n in STFT_DISTANCE_FFTS {
        total += stft_distance_term(x, y, n)?;
    }
    Ok(total / STFT_DISTANCE_FFTS.len() as f64)
}
