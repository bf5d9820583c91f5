//! Manifests and synthetic tone corpora.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{read_wav, resample_linear, write_wav, AudioBuffer, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};

/// WAV paths listed one per line. Relative paths resolve against the
/// manifest's directory; blank lines and `#` comments are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let entries: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect();
    if entries.is_empty() {
        return Err(Error::Corpus {
            path: path.to_path_buf(),
            message: "manifest lists no files".into(),
        });
    }
    Ok(entries)
}

/// Reads every manifest entry, resampling to `sample_rate` when needed.
pub fn load_manifest(path: &Path, sample_rate: u32) -> Result<Vec<(PathBuf, AudioBuffer)>> {
    read_manifest(path)?
        .into_iter()
        .map(|p| {
            let audio = read_wav(&p).map_err(|e| Error::Corpus {
                path: p.clone(),
                message: e.to_string(),
            })?;
            let audio = if audio.sample_rate() == sample_rate {
                audio
            } else {
                resample_linear(&audio, sample_rate)?
            };
            Ok((p, audio))
        })
        .collect()
}

/// Writes `utterances` as `utt_XXXX.wav` plus `manifest.txt` into `dir`
/// and returns the manifest path.
pub fn write_corpus(dir: &Path, utterances: &[AudioBuffer]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for (i, u) in utterances.iter().enumerate() {
        let name = format!("utt_{i:04}.wav");
        write_wav(u, &dir.join(&name))?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Deterministic split: every `k`-th item (starting at index 0) is held out.
pub fn split_held_out<T: Clone>(items: &[T], every: usize) -> (Vec<T>, Vec<T>) {
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, x) in items.iter().enumerate() {
        if every > 0 && i % every == 0 && items.len() > 1 {
            held.push(x.clone());
        } else {
            train.push(x.clone());
        }
    }
    (train, held)
}

/// Concatenated constant-frequency tones whose changes fall on frame
/// boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneCorpusConfig {
    pub sample_rate: u32,
    /// Samples per frame; segment lengths are multiples of this.
    pub hop: usize,
    pub min_segment_frames: usize,
    pub max_segment_frames: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Tone frequencies are multiples of this many Hz within the range.
    pub freq_step: f64,
    pub min_freq: f64,
    pub max_freq: f64,
    /// Adjacent segments differ by at least this much.
    pub min_freq_gap: f64,
    pub amplitude: f64,
}

impl Default for ToneCorpusConfig {
    fn default() -> Self {
        ToneCorpusConfig {
            sample_rate: DEFAULT_SAMPLE_RATE,
            hop: 320,
            min_segment_frames: 10,
            max_segment_frames: 20,
            min_segments: 2,
            max_segments: 4,
            freq_step: 50.0,
            min_freq: 150.0,
            max_freq: 3000.0,
            min_freq_gap: 300.0,
            amplitude: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToneUtterance {
    pub audio: AudioBuffer,
    pub frequencies: Vec<f64>,
    /// Frame index at which each segment after the first begins.
    pub boundary_frames: Vec<usize>,
    pub frames: usize,
}

fn tone(freq: f64, amplitude: f64, n: usize, rate: u32) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| amplitude * (2.0 * PI * freq * i as f64 / rate as f64).sin())
}

/// Tones at the given frequencies, each lasting the matching frame count.
pub fn tone_sequence(freqs: &[f64], frames: &[usize], cfg: &ToneCorpusConfig) -> Result<ToneUtterance> {
    if freqs.len() != frames.len() || freqs.is_empty() {
        return Err(Error::InvalidArgument("one frame count per tone required".into()));
    }
    let mut samples = Vec::new();
    let mut boundary_frames = Vec::new();
    let mut at = 0;
    for (i, (&f, &n)) in freqs.iter().zip(frames).enumerate() {
        if i > 0 {
            boundary_frames.push(at);
        }
        samples.extend(tone(f, cfg.amplitude, n * cfg.hop, cfg.sample_rate));
        at += n;
    }
    Ok(ToneUtterance {
        audio: AudioBuffer::new(samples, cfg.sample_rate)?,
        frequencies: freqs.to_vec(),
        boundary_frames,
        frames: at,
    })
}

pub fn random_tone_utterance<R: Rng + ?Sized>(cfg: &ToneCorpusConfig, rng: &mut R) -> Result<ToneUtterance> {
    let n_seg = rng.random_range(cfg.min_segments..=cfg.max_segments);
    let lo = (cfg.min_freq / cfg.freq_step).ceil() as i64;
    let hi = (cfg.max_freq / cfg.freq_step).floor() as i64;
    if lo > hi {
        return Err(Error::Config("empty tone frequency range".into()));
    }
    let mut freqs: Vec<f64> = Vec::with_capacity(n_seg);
    while freqs.len() < n_seg {
        let f = rng.random_range(lo..=hi) as f64 * cfg.freq_step;
        if freqs.last().is_none_or(|&p| (p - f).abs() >= cfg.min_freq_gap) {
            freqs.push(f);
        }
    }
    let frames: Vec<usize> = (0..n_seg)
        .map(|_| rng.random_range(cfg.min_segment_frames..=cfg.max_segment_frames))
        .collect();
    tone_sequence(&freqs, &frames, cfg)
}

pub fn tone_corpus(cfg: &ToneCorpusConfig, n: usize, seed: u64) -> Result<Vec<ToneUtterance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_tone_utterance(cfg, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_layout() {
        let cfg = ToneCorpusConfig::default();
        let u = tone_sequence(&[200.0, 800.0], &[25, 25], &cfg).unwrap();
        assert_eq!(u.audio.len(), 16000);
        assert_eq!(u.boundary_frames, vec![25]);
        assert_eq!(u.frames, 50);
    }

    #[test]
    fn random_corpus_is_seeded() {
        let cfg = ToneCorpusConfig::default();
        let a = tone_corpus(&cfg, 4, 3).unwrap();
        assert_eq!(a, tone_corpus(&cfg, 4, 3).unwrap());
        for u in &a {
            assert!(u.frequencies.windows(2).all(|w| (w[0] - w[1]).abs() >= 300.0));
            assert_eq!(u.audio.len(), u.frames * 320);
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ToneCorpusConfig::default();
        let utts: Vec<AudioBuffer> = tone_corpus(&cfg, 2, 1).unwrap().into_iter().map(|u| u.audio).collect();
        let m = write_corpus(dir.path(), &utts).unwrap();
        fs::write(&m, format!("# comment\n\n{}", fs::read_to_string(&m).unwrap())).unwrap();
        let loaded = load_manifest(&m, 16000).unwrap();
        assert_eq!(loaded.len(), 2);
        assert!(loaded[0].1.samples().iter().zip(utts[0].samples()).all(|(a, b)| (a - b).abs() <= 1.0 / 32768.0));
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.txt");
        fs::write(&m, "nope.wav\n").unwrap();
        let err = load_manifest(&m, 16000).unwrap_err().to_string();
        assert!(err.contains("nope.wav"), "{err}");
    }

    #[test]
    fn held_out_split() {
        let (train, held) = split_held_out(&[0, 1, 2, 3, 4, 5], 3);
        assert_eq!(held, vec![0, 3]);
        assert_eq!(train, vec![1, 2, 4, 5]);
    }
}
