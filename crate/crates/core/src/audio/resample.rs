use super::AudioBuffer;
use crate::error::{Error, Result};

/// Linear-interpolation resampler. Output length is
/// `round(len * target / source)`; positions past the last input sample
/// hold its value. No anti-alias filtering is applied.
pub fn resample_linear(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    let source_rate = buffer.sample_rate();
    if source_rate == target_rate {
        return Ok(buffer.clone());
    }
    let x = buffer.samples();
    let out_len =
        ((x.len() as u128 * target_rate as u128 * 2 + source_rate as u128) / (2 * source_rate as u128)) as usize;
    let step = source_rate as f64 / target_rate as f64;
    let out = (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let j = pos.floor() as usize;
            if j + 1 >= x.len() {
                x[x.len() - 1]
            } else {
                let frac = pos - j as f64;
                x[j] + (x[j + 1] - x[j]) * frac
            }
        })
        .collect();
    AudioBuffer::new(out, target_rate)
}
