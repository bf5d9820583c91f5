//! Parameter initialization.

use rand::Rng;
use rand_distr::StandardNormal;

/// Near-orthogonal `rows x cols` matrix: Gaussian entries followed by one
/// Gram-Schmidt pass over the shorter side, scaled by `gain`.
///
/// When `rows <= cols` the rows come out orthonormal, otherwise the columns
/// do. Degenerate vectors are left as drawn.
pub fn near_orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let mut m: Vec<f64> = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    if rows <= cols {
        let vecs: Vec<Vec<f64>> = m.chunks(cols).map(<[f64]>::to_vec).collect();
        let ortho = gram_schmidt(vecs);
        for (r, v) in ortho.into_iter().enumerate() {
            m[r * cols..(r + 1) * cols].copy_from_slice(&v);
        }
    } else {
        let vecs: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| m[r * cols + c]).collect())
            .collect();
        let ortho = gram_schmidt(vecs);
        for (c, v) in ortho.into_iter().enumerate() {
            for (r, x) in v.into_iter().enumerate() {
                m[r * cols + c] = x;
            }
        }
    }
    m.iter_mut().for_each(|x| *x *= gain);
    m
}

fn gram_schmidt(mut vecs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for i in 0..vecs.len() {
        for j in 0..i {
            let (done, rest) = vecs.split_at_mut(i);
            let proj: f64 = done[j].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (x, q) in rest[0].iter_mut().zip(&done[j]) {
                *x -= proj * q;
            }
        }
        let norm = vecs[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            vecs[i].iter_mut().for_each(|x| *x /= norm);
        }
    }
    vecs
}
