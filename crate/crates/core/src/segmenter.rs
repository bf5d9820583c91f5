//! Boundary-driven partitioning and per-segment compression.
//!
//! The compressor (DFE) runs two kernel-3 convolutions and average-pools the
//! segment to one column; the expander (DFD) replicates a column back to
//! the segment length, runs two kernel-3 convolutions at the hidden width
//! and projects to the feature width.

use log::warn;
use rand_chacha::ChaCha8Rng;

use crate::detector::BoundarySet;
use crate::error::{Error, Result};
use crate::ndgrad::init::near_orthogonal;
use crate::ndgrad::{Padding, ParamStore, Tensor};

/// Half-open frame intervals tiling `[0, total)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentLayout {
    records: Vec<(usize, usize)>,
    total: usize,
}

impl SegmentLayout {
    pub fn from_boundaries(boundaries: &BoundarySet) -> Self {
        let mut records = Vec::with_capacity(boundaries.len() + 1);
        let mut start = 0;
        for &b in boundaries.indices() {
            records.push((start, b));
            start = b;
        }
        records.push((start, boundaries.total()));
        SegmentLayout {
            records,
            total: boundaries.total(),
        }
    }

    /// Layout from consecutive segment lengths, each at least 1.
    pub fn from_lengths(lengths: &[usize]) -> Result<Self> {
        if lengths.is_empty() || lengths.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid segment lengths {lengths:?}")));
        }
        let mut records = Vec::with_capacity(lengths.len());
        let mut start = 0usize;
        for &l in lengths {
            let end = start
                .checked_add(l)
                .ok_or_else(|| Error::InvalidArgument("segment lengths overflow".into()))?;
            records.push((start, end));
            start = end;
        }
        Ok(SegmentLayout { records, total: start })
    }

    pub fn records(&self) -> &[(usize, usize)] {
        &self.records
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.records.iter().map(|(s, e)| e - s).collect()
    }

    /// Index of the segment containing frame `t`.
    pub fn segment_of(&self, t: usize) -> Option<usize> {
        if t >= self.total {
            return None;
        }
        Some(self.records.partition_point(|&(_, end)| end <= t))
    }
}

/// Drops boundaries at or outside `0` / `total` (with a warning), sorts and
/// deduplicates the rest.
pub fn sanitize_boundaries(mut raw: Vec<usize>, total: usize) -> BoundarySet {
    let before = raw.len();
    raw.retain(|&b| b > 0 && b < total);
    if raw.len() != before {
        warn!("dropped {} boundaries outside (0, {total})", before - raw.len());
    }
    raw.sort_unstable();
    raw.dedup();
    BoundarySet::new(raw, total).expect("sanitized boundaries are valid")
}

/// Splits `[D, T]` features into `|boundaries| + 1` segments.
pub fn partition(features: &Tensor, boundaries: &BoundarySet) -> Result<(Vec<Tensor>, SegmentLayout)> {
    let t = match features.shape() {
        [_, t] => *t,
        s => return Err(Error::Shape(format!("partition expects [D, T], got {s:?}"))),
    };
    if boundaries.total() != t {
        return Err(Error::InvalidArgument(format!(
            "boundaries cover {} frames, features have {t}",
            boundaries.total()
        )));
    }
    let layout = SegmentLayout::from_boundaries(boundaries);
    let segments = layout
        .records()
        .iter()
        .map(|&(s, e)| features.slice_last(s, e - s))
        .collect::<Result<Vec<_>>>()?;
    Ok((segments, layout))
}

/// Concatenates segments in layout order.
pub fn reassemble(segments: &[Tensor], layout: &SegmentLayout) -> Result<Tensor> {
    if segments.len() != layout.len() {
        return Err(Error::Shape(format!(
            "{} segments for a layout of {}",
            segments.len(),
            layout.len()
        )));
    }
    for (i, (seg, len)) in segments.iter().zip(layout.lengths()).enumerate() {
        if seg.shape().len() != 2 || seg.shape()[1] != len {
            return Err(Error::Shape(format!(
                "segment {i} has shape {:?}, layout expects length {len}",
                seg.shape()
            )));
        }
    }
    Tensor::concat_last(segments)
}

/// Per-segment compress/expand pair.
#[derive(Debug, Clone)]
pub struct SegmentAutoencoder {
    pub in_dim: usize,
    pub hidden: usize,
    pub enc1: (Tensor, Tensor),
    pub enc2: (Tensor, Tensor),
    pub dec1: (Tensor, Tensor),
    pub dec2: (Tensor, Tensor),
    pub proj: (Tensor, Tensor),
}

fn conv3(x: &Tensor, (w, b): &(Tensor, Tensor)) -> Result<Tensor> {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    let y = x.reshape(&[1, c, l])?.conv1d(w, Some(b), 1, Padding::symmetric(1))?;
    let c_out = y.shape()[1];
    y.reshape(&[c_out, l])
}

impl SegmentAutoencoder {
    pub fn new(in_dim: usize, hidden: usize, store: &mut ParamStore, prefix: &str, rng: &mut ChaCha8Rng) -> Result<Self> {
        if in_dim == 0 || hidden == 0 {
            return Err(Error::Config("segment autoencoder dimensions must be positive".into()));
        }
        let gain = (2.0 / 1.04f64).sqrt();
        let mut conv = |name: &str, c_in: usize, c_out: usize| {
            let w = near_orthogonal(c_out, c_in * 3, gain, rng);
            (
                store.add(&format!("{prefix}.{name}.weight"), w, &[c_out, c_in, 3]),
                store.add(&format!("{prefix}.{name}.bias"), vec![0.0; c_out], &[c_out]),
            )
        };
        let enc1 = conv("enc1", in_dim, hidden);
        let enc2 = conv("enc2", hidden, hidden);
        let dec1 = conv("dec1", hidden, hidden);
        let dec2 = conv("dec2", hidden, hidden);
        let pw = near_orthogonal(in_dim, hidden, 1.0, rng);
        let proj = (
            store.add(&format!("{prefix}.proj.weight"), pw, &[in_dim, hidden]),
            store.add(&format!("{prefix}.proj.bias"), vec![0.0; in_dim], &[in_dim]),
        );
        Ok(SegmentAutoencoder {
            in_dim,
            hidden,
            enc1,
            enc2,
            dec1,
            dec2,
            proj,
        })
    }

    /// `[D, l] -> [H, 1]` for any `l >= 1`.
    pub fn compress(&self, segment: &Tensor) -> Result<Tensor> {
        match segment.shape() {
            [d, l] if *d == self.in_dim && *l >= 1 => {}
            s => return Err(Error::Shape(format!("compress expects [{}, l>=1], got {s:?}", self.in_dim))),
        }
        let h = conv3(segment, &self.enc1)?.leaky_relu();
        conv3(&h, &self.enc2)?.leaky_relu().adaptive_avg_pool_to_1()
    }

    /// `[H, 1] -> [D, l]`.
    pub fn expand(&self, token: &Tensor, len: usize) -> Result<Tensor> {
        if len == 0 {
            return Err(Error::InvalidArgument("segment length must be at least 1".into()));
        }
        if token.shape() != [self.hidden, 1] {
            return Err(Error::Shape(format!("expand expects [{}, 1], got {:?}", self.hidden, token.shape())));
        }
        let h = conv3(&token.upsample_nearest(len)?, &self.dec1)?.leaky_relu();
        let h = conv3(&h, &self.dec2)?;
        h.linear(&self.proj.0, Some(&self.proj.1))
    }
}
