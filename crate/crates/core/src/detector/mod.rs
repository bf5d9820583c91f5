//! Self-supervised boundary detector.
//!
//! A strided conv stack maps raw audio to one latent frame per
//! `prod(strides)` samples. Training pulls adjacent frames together and
//! pushes randomly drawn frames of the same utterance apart. At inference
//! the dissimilarity `1 - cos(z_t, z_{t+1})` is min-max normalized and its
//! prominent interior peaks become segment boundaries.

mod model;
mod peaks;
pub(crate) mod train;

pub use model::Detector;
pub use peaks::{find_peaks, local_maxima, min_max_normalize, prominence, PeakConstraints};
pub use train::{
    boundary_f1, contrastive_loss, contrastive_loss_values, held_out_loss, sample_negatives, similarity_scores,
    train_detector, utterance_loss, DetectorTrainConfig, LossRecord, TrainedDetector,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub kernel_sizes: Vec<usize>,
    pub strides: Vec<usize>,
    pub embed_dim: usize,
    pub proj_dim: usize,
    pub alpha: f64,
    pub tau: f64,
    pub pred_steps: usize,
    pub n_negatives: usize,
    pub prominence: f64,
    pub peak_distance: Option<usize>,
    pub peak_width: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            kernel_sizes: vec![10, 8, 8, 4, 4],
            strides: vec![5, 4, 4, 2, 2],
            embed_dim: 64,
            proj_dim: 64,
            alpha: 1.0,
            tau: 0.5,
            pred_steps: 1,
            n_negatives: 1,
            prominence: 0.01,
            peak_distance: None,
            peak_width: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_sizes.is_empty() || self.kernel_sizes.len() != self.strides.len() {
            return Err(Error::Config("detector kernel_sizes and strides must be equally long and non-empty".into()));
        }
        if self.kernel_sizes.iter().chain(&self.strides).any(|&v| v == 0) {
            return Err(Error::Config("detector kernels and strides must be positive".into()));
        }
        if self.embed_dim == 0 || self.proj_dim == 0 {
            return Err(Error::Config("detector dimensions must be positive".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.pred_steps == 0 || self.n_negatives == 0 {
            return Err(Error::Config("pred_steps and n_negatives must be positive".into()));
        }
        if !(self.prominence >= 0.0) {
            return Err(Error::Config("prominence must be non-negative".into()));
        }
        Ok(())
    }

    /// Samples per latent frame.
    pub fn hop(&self) -> usize {
        self.strides.iter().product()
    }

    /// Frames produced for `samples` input samples.
    pub fn frames_for(&self, samples: usize) -> usize {
        self.strides.iter().fold(samples, |t, &s| t.div_ceil(s))
    }

    pub fn peak_constraints(&self) -> PeakConstraints {
        PeakConstraints {
            prominence: Some(self.prominence),
            distance: self.peak_distance,
            width: self.peak_width,
        }
    }
}

/// Strictly increasing interior frame indices of a `total`-frame sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySet {
    indices: Vec<usize>,
    total: usize,
}

impl BoundarySet {
    pub fn new(indices: Vec<usize>, total: usize) -> Result<Self> {
        let interior = indices.iter().all(|&b| b > 0 && b < total);
        let increasing = indices.windows(2).all(|w| w[0] < w[1]);
        if !interior || !increasing {
            return Err(Error::InvalidArgument(format!(
                "boundaries {indices:?} are not strictly increasing inside (0, {total})"
            )));
        }
        Ok(BoundarySet { indices, total })
    }

    pub fn empty(total: usize) -> Self {
        BoundarySet {
            indices: Vec::new(),
            total,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Boundaries from a raw dissimilarity trace over `total` frames: min-max
/// normalize, then keep interior peaks that pass `constraints`.
pub fn boundaries_from_trace(trace: &[f64], total: usize, constraints: &PeakConstraints) -> Result<BoundarySet> {
    let Some(norm) = min_max_normalize(trace) else {
        return Ok(BoundarySet::empty(total));
    };
    BoundarySet::new(find_peaks(&norm, constraints), total)
}
