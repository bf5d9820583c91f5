//! Reconstruction metrics, bitrate arithmetic and codebook analyses.

pub mod cluster;
mod metrics;
pub mod rates;
mod report;
mod stoi;
mod utilization;

pub use cluster::{kmeans_silhouette, silhouette, Clustering};
pub use metrics::{mel_error, stft_distance, stft_distance_term, STFT_DISTANCE_FFTS};
pub use rates::{bps, index_bits, stream_bps_payload, stream_bps_total, stream_tkr, tkr, Rate};
pub use report::{evaluate_utterance, AggregateMetrics, MetricReport, ReportHeader, Unavailable, UtteranceMetrics};
pub use stoi::{resample_sinc, stoi, STOI_RATE};
pub use utilization::{codebook_utilization, CodeFrequency, UtilizationReport};
