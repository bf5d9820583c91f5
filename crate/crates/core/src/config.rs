//! Run configuration as flat `section.key = value` text.
//!
//! Sections are `detector`, `codec`, `quantizer`, `training` and `eval`.
//! `#` starts a comment, lists are comma-separated and optional values take
//! `none`. Unknown or repeated keys are errors. [`RunConfig::to_text`]
//! writes every key in a fixed order and parses back to the same config.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::codec::{CodecConfig, CodecTrainConfig, MelTerm};
use crate::detector::{DetectorConfig, DetectorTrainConfig};
use crate::error::{Error, Result};
use crate::evalkit::cluster::{DEFAULT_MAX_ITER, DEFAULT_SAMPLE, DEFAULT_SEED};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub kmeans_k: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_sample: usize,
    pub kmeans_seed: u64,
    pub top_k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            kmeans_k: 4,
            kmeans_max_iter: DEFAULT_MAX_ITER,
            kmeans_sample: DEFAULT_SAMPLE,
            kmeans_seed: DEFAULT_SEED,
            top_k: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub detector: DetectorConfig,
    pub codec: CodecConfig,
    pub detector_training: DetectorTrainConfig,
    pub codec_training: CodecTrainConfig,
    /// Every `n`-th manifest entry (starting with the first) is held out.
    pub held_out_every: usize,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            detector: DetectorConfig::default(),
            codec: CodecConfig::default(),
            detector_training: DetectorTrainConfig::default(),
            codec_training: CodecTrainConfig::default(),
            held_out_every: 5,
            eval: EvalConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|p| parse(key, p.trim())).collect()
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "none" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn list<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".into(), |x| x.to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `section.key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: {key} set twice", i + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.to_string().trim_start_matches("config error: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.codec.validate()?;
        if self.held_out_every == 0 {
            return Err(Error::Config("training.held_out_every must be at least 1".into()));
        }
        if self.eval.kmeans_k < 2 {
            return Err(Error::Config("eval.kmeans_k must be at least 2".into()));
        }
        if !(self.detector_training.lr > 0.0) || !(self.codec_training.lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let d = &mut self.detector;
        let c = &mut self.codec;
        let dt = &mut self.detector_training;
        let ct = &mut self.codec_training;
        let e = &mut self.eval;
        match key {
            "detector.kernel_sizes" => d.kernel_sizes = parse_list(key, v)?,
            "detector.strides" => d.strides = parse_list(key, v)?,
            "detector.embed_dim" => d.embed_dim = parse(key, v)?,
            "detector.proj_dim" => d.proj_dim = parse(key, v)?,
            "detector.alpha" => d.alpha = parse(key, v)?,
            "detector.tau" => d.tau = parse(key, v)?,
            "detector.pred_steps" => d.pred_steps = parse(key, v)?,
            "detector.n_negatives" => d.n_negatives = parse(key, v)?,
            "detector.prominence" => d.prominence = parse(key, v)?,
            "detector.peak_distance" => d.peak_distance = parse_opt(key, v)?,
            "detector.peak_width" => d.peak_width = parse_opt(key, v)?,
            "codec.sample_rate" => c.sample_rate = parse(key, v)?,
            "codec.strides" => c.strides = parse_list(key, v)?,
            "codec.base_channels" => c.base_channels = parse(key, v)?,
            "codec.latent_dim" => c.latent_dim = parse(key, v)?,
            "codec.feature_dim" => c.feature_dim = parse(key, v)?,
            "codec.hidden" => c.hidden = parse(key, v)?,
            "codec.time_weight" => c.time_weight = parse(key, v)?,
            "codec.mel_weights" | "codec.mel_ffts" | "codec.mel_hops" | "codec.mel_bins" => {
                set_mel_column(&mut c.mel_terms, key, v)?
            }
            "quantizer.variant" => c.variant = v.parse()?,
            "quantizer.levels" => c.levels = parse(key, v)?,
            "quantizer.groups" => c.groups = parse(key, v)?,
            "training.detector_steps" => dt.steps = parse(key, v)?,
            "training.detector_batch" => dt.batch_size = parse(key, v)?,
            "training.detector_lr" => dt.lr = parse(key, v)?,
            "training.detector_crop" => dt.crop_samples = parse(key, v)?,
            "training.detector_eval_every" => dt.eval_every = parse(key, v)?,
            "training.codec_steps" => ct.steps = parse(key, v)?,
            "training.codec_batch" => ct.batch_size = parse(key, v)?,
            "training.codec_lr" => ct.lr = parse(key, v)?,
            "training.codec_crop" => ct.crop_samples = parse(key, v)?,
            "training.codec_eval_every" => ct.eval_every = parse(key, v)?,
            "training.held_out_every" => self.held_out_every = parse(key, v)?,
            "eval.kmeans_k" => e.kmeans_k = parse(key, v)?,
            "eval.kmeans_max_iter" => e.kmeans_max_iter = parse(key, v)?,
            "eval.kmeans_sample" => e.kmeans_sample = parse(key, v)?,
            "eval.kmeans_seed" => e.kmeans_seed = parse(key, v)?,
            "eval.top_k" => e.top_k = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = &self.detector;
        let c = &self.codec;
        let dt = &self.detector_training;
        let ct = &self.codec_training;
        let e = &self.eval;
        let m = &c.mel_terms;
        vec![
            ("detector.kernel_sizes", list(&d.kernel_sizes)),
            ("detector.strides", list(&d.strides)),
            ("detector.embed_dim", d.embed_dim.to_string()),
            ("detector.proj_dim", d.proj_dim.to_string()),
            ("detector.alpha", d.alpha.to_string()),
            ("detector.tau", d.tau.to_string()),
            ("detector.pred_steps", d.pred_steps.to_string()),
            ("detector.n_negatives", d.n_negatives.to_string()),
            ("detector.prominence", d.prominence.to_string()),
            ("detector.peak_distance", opt(&d.peak_distance)),
            ("detector.peak_width", opt(&d.peak_width)),
            ("codec.sample_rate", c.sample_rate.to_string()),
            ("codec.strides", list(&c.strides)),
            ("codec.base_channels", c.base_channels.to_string()),
            ("codec.latent_dim", c.latent_dim.to_string()),
            ("codec.feature_dim", c.feature_dim.to_string()),
            ("codec.hidden", c.hidden.to_string()),
            ("codec.time_weight", c.time_weight.to_string()),
            ("codec.mel_weights", list(&m.iter().map(|t| t.weight).collect::<Vec<_>>())),
            ("codec.mel_ffts", list(&m.iter().map(|t| t.n_fft).collect::<Vec<_>>())),
            ("codec.mel_hops", list(&m.iter().map(|t| t.hop).collect::<Vec<_>>())),
            ("codec.mel_bins", list(&m.iter().map(|t| t.n_mels).collect::<Vec<_>>())),
            ("quantizer.variant", c.variant.to_string()),
            ("quantizer.levels", c.levels.to_string()),
            ("quantizer.groups", c.groups.to_string()),
            ("training.detector_steps", dt.steps.to_string()),
            ("training.detector_batch", dt.batch_size.to_string()),
            ("training.detector_lr", dt.lr.to_string()),
            ("training.detector_crop", dt.crop_samples.to_string()),
            ("training.detector_eval_every", dt.eval_every.to_string()),
            ("training.codec_steps", ct.steps.to_string()),
            ("training.codec_batch", ct.batch_size.to_string()),
            ("training.codec_lr", ct.lr.to_string()),
            ("training.codec_crop", ct.crop_samples.to_string()),
            ("training.codec_eval_every", ct.eval_every.to_string()),
            ("training.held_out_every", self.held_out_every.to_string()),
            ("eval.kmeans_k", e.kmeans_k.to_string()),
            ("eval.kmeans_max_iter", e.kmeans_max_iter.to_string()),
            ("eval.kmeans_sample", e.kmeans_sample.to_string()),
            ("eval.kmeans_seed", e.kmeans_seed.to_string()),
            ("eval.top_k", e.top_k.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// The four `codec.mel_*` keys each set one field across all resolutions;
/// a longer or shorter list changes the number of resolutions.
fn set_mel_column(terms: &mut Vec<MelTerm>, key: &str, v: &str) -> Result<()> {
    let n = v.split(',').count();
    let fill = MelTerm { weight: 1.0, n_fft: 256, hop: 64, n_mels: 32 };
    terms.resize(n, fill);
    match key {
        "codec.mel_weights" => {
            for (t, x) in terms.iter_mut().zip(parse_list::<f64>(key, v)?) {
                t.weight = x;
            }
        }
        "codec.mel_ffts" => {
            for (t, x) in terms.iter_mut().zip(parse_list::<usize>(key, v)?) {
                t.n_fft = x;
            }
        }
        "codec.mel_hops" => {
            for (t, x) in terms.iter_mut().zip(parse_list::<usize>(key, v)?) {
                t.hop = x;
            }
        }
        _ => {
            for (t, x) in terms.iter_mut().zip(parse_list::<usize>(key, v)?) {
                t.n_mels = x;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::Variant;

    #[test]
    fn defaults_echo_canonically() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert!(text.contains("detector.tau = 0.5\n"));
        assert!(text.contains("codec.mel_ffts = 1024,512,256,128\n"));
        assert!(text.contains("detector.peak_distance = none\n"));
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = RunConfig::parse(
            "# small run\n\ncodec.strides = 4, 4, 4  # ratio 64\nquantizer.variant = gsq_m2m\nquantizer.levels=4\ndetector.peak_width = 1.5\n",
        )
        .unwrap();
        assert_eq!(cfg.codec.strides, vec![4, 4, 4]);
        assert_eq!(cfg.codec.variant, Variant::GsqManyToMany);
        assert_eq!(cfg.detector.peak_width, Some(1.5));
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let e = RunConfig::parse("codec.bogus = 1").unwrap_err().to_string();
        assert!(e.contains("unknown key codec.bogus"), "{e}");
        assert!(RunConfig::parse("detector.tau = 0.1\ndetector.tau = 0.2").is_err());
        assert!(RunConfig::parse("detector.tau").is_err());
        assert!(RunConfig::parse("detector.tau = fast").is_err());
        assert!(RunConfig::parse("detector.tau = -1").is_err());
        assert!(RunConfig::parse("quantizer.variant = vq").is_err());
        assert!(RunConfig::parse("seed = 3").is_err());
    }
}
