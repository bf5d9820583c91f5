//! Line-delimited JSON evaluation reports: a header record, one record per
//! utterance and a closing aggregate record.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{mel_error, stft_distance};
use super::rates::{stream_bps_payload, stream_bps_total, stream_seconds, stream_tkr, to_f64};
use super::stoi::stoi;
use crate::audio::AudioBuffer;
use crate::codec::TokenStream;
use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "distok-eval";
pub const REPORT_VERSION: u32 = 1;

/// Placeholder for metrics this toolkit does not compute (WER, PESQ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Unavailable {
    #[default]
    #[serde(rename = "unavailable")]
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub format: String,
    pub version: u32,
    pub mel_error: String,
    pub stft_distance: String,
    pub stoi: String,
}

impl Default for ReportHeader {
    fn default() -> Self {
        ReportHeader {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            mel_error: "mean |log-mel diff|, n_fft=1024 hop=256 n_mels=80, log(1e-5 + power)".into(),
            stft_distance: "mean over n_fft {512,1024,2048}, hop n_fft/4, of mean |mag diff| + mean |log(1e-5 + mag) diff|".into(),
            stoi: "2011 algorithm, 10 kHz, 15 bands from 150 Hz, 30-frame segments, null when too short".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    pub id: String,
    pub seconds: f64,
    pub segments: u64,
    pub mel_error: f64,
    pub stft_distance: f64,
    pub stoi: Option<f64>,
    pub tkr: f64,
    pub bps_payload: f64,
    pub bps_total: f64,
    #[serde(default)]
    pub wer: Unavailable,
    #[serde(default)]
    pub pesq: Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub utterances: u64,
    pub seconds: f64,
    pub mel_error: f64,
    pub stft_distance: f64,
    /// Mean over utterances long enough to score.
    pub stoi: Option<f64>,
    /// Duration-weighted, i.e. total tokens over total seconds.
    pub tkr: f64,
    pub bps_payload: f64,
    pub bps_total: f64,
    #[serde(default)]
    pub wer: Unavailable,
    #[serde(default)]
    pub pesq: Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(ReportHeader),
    Utterance(UtteranceMetrics),
    Aggregate(AggregateMetrics),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub header: ReportHeader,
    pub utterances: Vec<UtteranceMetrics>,
    pub aggregate: AggregateMetrics,
}

/// Metrics for one reconstruction and the stream it was decoded from.
pub fn evaluate_utterance(id: &str, clean: &AudioBuffer, recon: &AudioBuffer, stream: &TokenStream) -> Result<UtteranceMetrics> {
    let stoi = match stoi(clean, recon) {
        Ok(s) => Some(s),
        Err(Error::AudioTooShort { .. }) => {
            log::warn!("{id}: too short for stoi");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(UtteranceMetrics {
        id: id.to_string(),
        seconds: to_f64(stream_seconds(stream)),
        segments: stream.records.len() as u64,
        mel_error: mel_error(clean, recon)?,
        stft_distance: stft_distance(clean, recon)?,
        stoi,
        tkr: to_f64(stream_tkr(stream)?),
        bps_payload: to_f64(stream_bps_payload(stream)?),
        bps_total: to_f64(stream_bps_total(stream)?),
        wer: Unavailable::Unavailable,
        pesq: Unavailable::Unavailable,
    })
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

impl MetricReport {
    pub fn new(utterances: Vec<UtteranceMetrics>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::InvalidArgument("report needs at least one utterance".into()));
        }
        let seconds: f64 = utterances.iter().map(|u| u.seconds).sum();
        let weighted = |f: fn(&UtteranceMetrics) -> f64| utterances.iter().map(|u| f(u) * u.seconds).sum::<f64>() / seconds;
        let aggregate = AggregateMetrics {
            utterances: utterances.len() as u64,
            seconds,
            mel_error: mean(utterances.iter().map(|u| u.mel_error)).unwrap_or(0.0),
            stft_distance: mean(utterances.iter().map(|u| u.stft_distance)).unwrap_or(0.0),
            stoi: mean(utterances.iter().filter_map(|u| u.stoi)),
            tkr: weighted(|u| u.tkr),
            bps_payload: weighted(|u| u.bps_payload),
            bps_total: weighted(|u| u.bps_total),
            wer: Unavailable::Unavailable,
            pesq: Unavailable::Unavailable,
        };
        Ok(MetricReport {
            header: ReportHeader::default(),
            utterances,
            aggregate,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let lines = std::iter::once(Line::Header(self.header.clone()))
            .chain(self.utterances.iter().cloned().map(Line::Utterance))
            .chain(std::iter::once(Line::Aggregate(self.aggregate.clone())));
        for l in lines {
            out.push_str(&serde_json::to_string(&l).expect("report records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut utterances = Vec::new();
        let mut aggregate = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: Line = serde_json::from_str(line)
                .map_err(|e| Error::InvalidArgument(format!("report line {}: {e}", i + 1)))?;
            match rec {
                Line::Header(h) if header.is_none() && i == 0 => header = Some(h),
                Line::Utterance(u) if header.is_some() && aggregate.is_none() => utterances.push(u),
                Line::Aggregate(a) if header.is_some() && aggregate.is_none() => aggregate = Some(a),
                _ => return Err(Error::InvalidArgument(format!("report line {}: record out of order", i + 1))),
            }
        }
        match (header, aggregate) {
            (Some(header), Some(aggregate)) => Ok(MetricReport {
                header,
                utterances,
                aggregate,
            }),
            _ => Err(Error::InvalidArgument("report is missing its header or aggregate record".into())),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        MetricReport::from_jsonl(&text)
    }
}
