//! Empirical rate-distortion measurement for scalar codebooks.

use rand::Rng;

/// Sorted reconstruction points of a scalar quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCodebook {
    points: Vec<f64>,
}

impl ScalarCodebook {
    /// `levels` cells of equal width on `[lo, hi]`, reconstructing at cell
    /// midpoints.
    pub fn uniform(lo: f64, hi: f64, levels: usize) -> Self {
        let w = (hi - lo) / levels as f64;
        ScalarCodebook {
            points: (0..levels).map(|i| lo + (i as f64 + 0.5) * w).collect(),
        }
    }

    pub fn from_points(mut points: Vec<f64>) -> Self {
        points.sort_by(f64::total_cmp);
        ScalarCodebook { points }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn quantize(&self, x: f64) -> f64 {
        let p = &self.points;
        let i = p.partition_point(|&c| c < x);
        match (i.checked_sub(1).map(|j| p[j]), p.get(i)) {
            (Some(a), Some(&b)) => {
                if x - a <= b - x {
                    a
                } else {
                    b
                }
            }
            (Some(a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub rate: u32,
    pub distortion: f64,
}

/// Monte Carlo mean squared error per dimension at each rate.
/// `quantizer(rate, x)` must return the reconstruction of `x`.
pub fn rate_distortion_probe<R: Rng + ?Sized>(
    sampler: &mut dyn FnMut(&mut R) -> Vec<f64>,
    quantizer: &dyn Fn(u32, &[f64]) -> Vec<f64>,
    rates: &[u32],
    n_samples: usize,
    rng: &mut R,
) -> Vec<RdPoint> {
    rates
        .iter()
        .map(|&rate| {
            let mut total = 0.0;
            let mut count = 0usize;
            for _ in 0..n_samples {
                let x = sampler(rng);
                let y = quantizer(rate, &x);
                total += x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                count += x.len();
            }
            RdPoint {
                rate,
                distortion: if count == 0 { 0.0 } else { total / count as f64 },
            }
        })
        .collect()
}

/// Least-squares slope of `log2 D` against `R`. `None` when fewer than two
/// points or any distortion is not positive.
pub fn fit_log2_slope(points: &[RdPoint]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|p| !(p.distortion > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.rate as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.distortion.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}
