use crate::error::{Error, Result};
use crate::ndgrad::Tensor;

/// Grid point `j` of an `L`-level grid on `[-1, 1]`.
pub fn fsq_grid_value(j: u32, levels: u32) -> f64 {
    -1.0 + 2.0 * j as f64 / (levels - 1) as f64
}

/// Nearest grid index for a bounded value; midpoints go to the larger
/// index.
pub fn fsq_index(bounded: f64, levels: u32) -> u32 {
    let u = (bounded + 1.0) * (levels - 1) as f64 / 2.0;
    (u + 0.5).floor().clamp(0.0, (levels - 1) as f64) as u32
}

/// Per-element `tanh` bounding then grid snapping.
pub fn fsq_quantize(x: &[f64], levels: u32) -> Result<(Vec<f64>, Vec<u32>)> {
    check_levels(levels)?;
    let idx: Vec<u32> = x.iter().map(|&v| fsq_index(v.tanh(), levels)).collect();
    let values = idx.iter().map(|&j| fsq_grid_value(j, levels)).collect();
    Ok((values, idx))
}

/// Differentiable FSQ: gradient flows through `tanh`, straight through the
/// rounding. Returns the quantized tensor and one index per element.
pub fn fsq_tensor(x: &Tensor, levels: u32) -> Result<(Tensor, Vec<u32>)> {
    check_levels(levels)?;
    let bounded = x.tanh();
    let idx: Vec<u32> = bounded.data().iter().map(|&v| fsq_index(v, levels)).collect();
    let q = bounded.straight_through(|v| fsq_grid_value(fsq_index(v, levels), levels));
    Ok((q, idx))
}

fn check_levels(levels: u32) -> Result<()> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("fsq needs L >= 2, got {levels}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn saturation() {
        let (v, i) = fsq_quantize(&[f64::INFINITY, 50.0, f64::NEG_INFINITY], 8).unwrap();
        assert_eq!(i, vec![7, 7, 0]);
        assert_eq!(v, vec![1.0, 1.0, -1.0]);
    }

    #[test]
    fn zero_ties_upward() {
        let (v, i) = fsq_quantize(&[0.0], 8).unwrap();
        assert_eq!(i, vec![4]);
        assert!((v[0] - 1.0 / 7.0).abs() < 1e-15);
        // odd L has a grid point at zero
        assert_eq!(fsq_quantize(&[0.0], 5).unwrap().1, vec![2]);
    }

    #[test]
    fn idempotent_on_grid() {
        for l in 2..=16u32 {
            for j in 0..l {
                let g = fsq_grid_value(j, l);
                let (v, i) = fsq_quantize(&[g.atanh()], l).unwrap();
                assert_eq!(i[0], j, "L={l} j={j}");
                assert_eq!(v[0], g);
            }
        }
    }

    #[test]
    fn straight_through_gradient_is_tanh_derivative() {
        let x = Tensor::param(vec![0.3, -1.2], &[2]);
        let (q, _) = fsq_tensor(&x, 8).unwrap();
        q.sum().backward().unwrap();
        let g = x.grad().unwrap();
        for (gi, xi) in g.iter().zip([0.3f64, -1.2]) {
            assert!((gi - (1.0 - xi.tanh().powi(2))).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn monotone_and_bounded_error(a in -5.0f64..5.0, b in -5.0f64..5.0, l in 2u32..=16) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (v, _) = fsq_quantize(&[lo, hi], l).unwrap();
            prop_assert!(v[0] <= v[1]);
            // within half a grid step of the bounded value
            prop_assert!((v[0] - lo.tanh()).abs() <= 1.0 / (l - 1) as f64 + 1e-12);
        }

        #[test]
        fn vector_error_bound(x in prop::collection::vec(-4.0f64..4.0, 1..32), l in 2u32..=16) {
            let (v, _) = fsq_quantize(&x, l).unwrap();
            let err: f64 = x.iter().zip(&v).map(|(a, b)| (a.tanh() - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= (x.len() as f64).sqrt() / (l - 1) as f64 + 1e-12);
        }
    }
}
