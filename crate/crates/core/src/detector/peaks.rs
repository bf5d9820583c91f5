//! Local-maximum picking with topographic prominence.
//!
//! Semantics follow the usual signal-processing conventions: a peak is an
//! interior sample (or the middle of an interior plateau) strictly higher
//! than both neighbours; its prominence is its height above the higher of
//! the two lowest points reached before meeting strictly higher ground on
//! either side (or the trace end).

/// Optional peak constraints. `None` disables a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeakConstraints {
    pub prominence: Option<f64>,
    /// Minimum index distance between kept peaks; higher peaks win.
    pub distance: Option<usize>,
    /// Minimum width at half prominence, in samples.
    pub width: Option<f64>,
}

/// Indices of interior local maxima; plateaus report their middle
/// (rounded down).
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    if x.len() < 3 {
        return peaks;
    }
    let mut i = 1;
    let last = x.len() - 1;
    while i < last {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < last && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    peaks
}

/// Prominence of `peak` together with its left and right base indices.
pub fn prominence(x: &[f64], peak: usize) -> (f64, usize, usize) {
    let h = x[peak];
    let (mut left_min, mut left_base) = (h, peak);
    let mut i = peak;
    loop {
        if x[i] > h {
            break;
        }
        if x[i] < left_min {
            left_min = x[i];
            left_base = i;
        }
        if i == 0 {
            break;
        }
        i -= 1;
    }
    let (mut right_min, mut right_base) = (h, peak);
    for (j, &v) in x.iter().enumerate().skip(peak) {
        if v > h {
            break;
        }
        if v < right_min {
            right_min = v;
            right_base = j;
        }
    }
    (h - left_min.max(right_min), left_base, right_base)
}

/// Width at half prominence with linear interpolation between samples.
fn width(x: &[f64], peak: usize) -> f64 {
    let (prom, lb, rb) = prominence(x, peak);
    let level = x[peak] - prom / 2.0;
    let mut i = peak;
    while lb < i && level < x[i] {
        i -= 1;
    }
    let mut left = i as f64;
    if x[i] < level {
        left += (level - x[i]) / (x[i + 1] - x[i]);
    }
    let mut j = peak;
    while j < rb && level < x[j] {
        j += 1;
    }
    let mut right = j as f64;
    if x[j] < level {
        right -= (level - x[j]) / (x[j - 1] - x[j]);
    }
    right - left
}

/// Peaks passing every enabled constraint, in increasing index order.
/// Distance filtering is applied before the prominence and width tests.
pub fn find_peaks(x: &[f64], c: &PeakConstraints) -> Vec<usize> {
    let mut peaks = local_maxima(x);
    if let Some(d) = c.distance.filter(|&d| d > 1) {
        let mut order: Vec<usize> = (0..peaks.len()).collect();
        // highest first, later index first among equals
        order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(b.cmp(&a)));
        let mut keep = vec![true; peaks.len()];
        for &i in &order {
            if !keep[i] {
                continue;
            }
            for j in (0..i).rev() {
                if peaks[i] - peaks[j] >= d {
                    break;
                }
                keep[j] = false;
            }
            for j in i + 1..peaks.len() {
                if peaks[j] - peaks[i] >= d {
                    break;
                }
                keep[j] = false;
            }
        }
        peaks = peaks.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect();
    }
    if let Some(min) = c.prominence {
        peaks.retain(|&p| prominence(x, p).0 >= min);
    }
    if let Some(min) = c.width {
        peaks.retain(|&p| width(x, p) >= min);
    }
    peaks
}

/// Rescales to `[0, 1]`; `None` for empty or constant input.
pub fn min_max_normalize(x: &[f64]) -> Option<Vec<f64>> {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if x.is_empty() || hi <= lo {
        return None;
    }
    Some(x.iter().map(|v| (v - lo) / (hi - lo)).collect())
}
