//! Elementwise, reduction and shape operations.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Slope of the negative half of [`Tensor::leaky_relu`].
pub const LEAKY_SLOPE: f64 = 0.2;

/// Added to each norm in cosine similarity so zero vectors give 0.
pub const COSINE_EPS: f64 = 1e-8;

fn same_shape(a: &Tensor, b: &Tensor, op: &str) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{op}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

impl Tensor {
    fn map_unary(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64, f64) -> f64 + 'static) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|&x| f(x)).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g, out, parents| {
                let x = parents[0].data();
                let grad = g
                    .iter()
                    .zip(x.iter().zip(out))
                    .map(|(&g, (&x, &y))| g * df(x, y))
                    .collect();
                vec![Some(grad)]
            }),
        )
    }

    /// Elementwise binary op where either side may be a one-element tensor.
    fn zip_binary(
        &self,
        other: &Tensor,
        op: &str,
        f: impl Fn(f64, f64) -> f64,
        dfa: impl Fn(f64, f64) -> f64 + 'static,
        dfb: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Tensor> {
        let (na, nb) = (self.numel(), other.numel());
        let shape = if self.shape() == other.shape() || nb == 1 {
            self.shape().to_vec()
        } else if na == 1 {
            other.shape().to_vec()
        } else {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        };
        let n = na.max(nb);
        let data = {
            let (a, b) = (self.data(), other.data());
            (0..n)
                .map(|i| f(a[if na == 1 { 0 } else { i }], b[if nb == 1 { 0 } else { i }]))
                .collect()
        };
        Ok(Tensor::from_op(
            data,
            shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, parents| {
                let (a, b) = (parents[0].data(), parents[1].data());
                let (na, nb) = (a.len(), b.len());
                let mut ga = vec![0.0; na];
                let mut gb = vec![0.0; nb];
                for (i, &gi) in g.iter().enumerate() {
                    let ia = if na == 1 { 0 } else { i };
                    let ib = if nb == 1 { 0 } else { i };
                    ga[ia] += gi * dfa(a[ia], b[ib]);
                    gb[ib] += gi * dfb(a[ia], b[ib]);
                }
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_binary(other, "add", |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_binary(other, "sub", |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_binary(other, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map_unary(|x| c * x, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.map_unary(|x| x + c, |_, _| 1.0)
    }

    pub fn tanh(&self) -> Tensor {
        self.map_unary(f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn leaky_relu(&self) -> Tensor {
        self.map_unary(
            |x| if x > 0.0 { x } else { LEAKY_SLOPE * x },
            |x, _| if x > 0.0 { 1.0 } else { LEAKY_SLOPE },
        )
    }

    pub fn abs(&self) -> Tensor {
        self.map_unary(f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn square(&self) -> Tensor {
        self.map_unary(|x| x * x, |x, _| 2.0 * x)
    }

    pub fn exp(&self) -> Tensor {
        self.map_unary(f64::exp, |_, y| y)
    }

    /// Natural log; inputs must be positive.
    pub fn ln(&self) -> Tensor {
        self.map_unary(f64::ln, |x, _| 1.0 / x)
    }

    pub fn sum(&self) -> Tensor {
        let total = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op(
            vec![total],
            Vec::new(),
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Mean absolute difference.
    pub fn l1(&self, other: &Tensor) -> Result<Tensor> {
        same_shape(self, other, "l1")?;
        Ok(self.sub(other)?.abs().mean())
    }

    /// Mean squared difference.
    pub fn l2(&self, other: &Tensor) -> Result<Tensor> {
        same_shape(self, other, "l2")?;
        Ok(self.sub(other)?.square().mean())
    }

    /// Forward value is `f(x)`; the backward pass treats the op as identity.
    pub fn straight_through(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let data = self.data().iter().map(|&x| f(x)).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(|g, _, _| vec![Some(g.to_vec())]),
        )
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k, n) = match (self.shape(), other.shape()) {
            ([m, k], [k2, n]) if k == k2 => (*m, *k, *n),
            (a, b) => return Err(Error::Shape(format!("matmul: {a:?} x {b:?}"))),
        };
        let mut out = vec![0.0; m * n];
        {
            let (a, b) = (self.data(), other.data());
            for i in 0..m {
                let row = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let av = a[i * k + p];
                    if av == 0.0 {
                        continue;
                    }
                    for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                        *o += av * bv;
                    }
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, parents| {
                let (a, b) = (parents[0].data(), parents[1].data());
                let ga = parents[0].requires_grad().then(|| {
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            ga[i * k + p] = g[i * n..(i + 1) * n]
                                .iter()
                                .zip(&b[p * n..(p + 1) * n])
                                .map(|(x, y)| x * y)
                                .sum();
                        }
                    }
                    ga
                });
                let gb = parents[1].requires_grad().then(|| {
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let av = a[i * k + p];
                            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(&g[i * n..(i + 1) * n]) {
                                *o += av * gv;
                            }
                        }
                    }
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Adds `bias[c]` to every element of row `c` in a `[C, T]` tensor.
    pub fn add_row_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let (c, t) = match self.shape() {
            [c, t] if bias.numel() == *c => (*c, *t),
            s => {
                return Err(Error::Shape(format!(
                    "add_row_bias: {s:?} with bias {:?}",
                    bias.shape()
                )))
            }
        };
        let mut out = self.to_vec();
        {
            let b = bias.data();
            for (i, row) in out.chunks_mut(t.max(1)).enumerate().take(c) {
                row.iter_mut().for_each(|v| *v += b[i]);
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![c, t],
            vec![self.clone(), bias.clone()],
            Box::new(move |g, _, _| {
                let gb = (0..c).map(|i| g[i * t..(i + 1) * t].iter().sum()).collect();
                vec![Some(g.to_vec()), Some(gb)]
            }),
        ))
    }

    /// Affine map on a `[in, T]` frame sequence: `weight [out, in]`, optional
    /// `bias [out]`.
    pub fn linear(&self, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let y = weight.matmul(self)?;
        match bias {
            Some(b) => y.add_row_bias(b),
            None => Ok(y),
        }
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(&self, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        let Some(&t) = shape.last() else {
            return Err(Error::Shape("slice_last on a scalar".into()));
        };
        if start + len > t {
            return Err(Error::Shape(format!(
                "slice_last: {start}+{len} exceeds length {t}"
            )));
        }
        let rows = self.numel() / t.max(1);
        let mut out = Vec::with_capacity(rows * len);
        {
            let d = self.data();
            for r in 0..rows {
                out.extend_from_slice(&d[r * t + start..r * t + start + len]);
            }
        }
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = len;
        Ok(Tensor::from_op(
            out,
            out_shape,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; rows * t];
                for r in 0..rows {
                    gx[r * t + start..r * t + start + len].copy_from_slice(&g[r * len..(r + 1) * len]);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Concatenates along the last axis; leading dims must agree.
    pub fn concat_last(parts: &[Tensor]) -> Result<Tensor> {
        let Some(first) = parts.first() else {
            return Err(Error::Shape("concat_last of nothing".into()));
        };
        let lead = &first.shape()[..first.shape().len().saturating_sub(1)];
        if first.shape().is_empty() {
            return Err(Error::Shape("concat_last on scalars".into()));
        }
        for p in parts {
            if p.shape().len() != first.shape().len() || &p.shape()[..lead.len()] != lead {
                return Err(Error::Shape(format!(
                    "concat_last: {:?} vs {:?}",
                    first.shape(),
                    p.shape()
                )));
            }
        }
        let rows: usize = lead.iter().product();
        let lens: Vec<usize> = parts.iter().map(|p| *p.shape().last().unwrap()).collect();
        let total: usize = lens.iter().sum();
        let mut out = vec![0.0; rows * total];
        let mut offset = 0;
        for (p, &len) in parts.iter().zip(&lens) {
            let d = p.data();
            for r in 0..rows {
                out[r * total + offset..r * total + offset + len]
                    .copy_from_slice(&d[r * len..(r + 1) * len]);
            }
            offset += len;
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        Ok(Tensor::from_op(
            out,
            shape,
            parts.to_vec(),
            Box::new(move |g, _, _| {
                let mut grads = Vec::with_capacity(lens.len());
                let mut offset = 0;
                for &len in &lens {
                    let mut gp = vec![0.0; rows * len];
                    for r in 0..rows {
                        gp[r * len..(r + 1) * len]
                            .copy_from_slice(&g[r * total + offset..r * total + offset + len]);
                    }
                    offset += len;
                    grads.push(Some(gp));
                }
                grads
            }),
        ))
    }

    /// Rows `start..end` of the first axis.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        let Some(&r) = shape.first() else {
            return Err(Error::Shape("slice_rows on a scalar".into()));
        };
        if start > end || end > r {
            return Err(Error::Shape(format!("slice_rows: {start}..{end} of {r}")));
        }
        let inner = self.numel() / r.max(1);
        let out = self.data()[start * inner..end * inner].to_vec();
        let mut out_shape = shape;
        out_shape[0] = end - start;
        let n = self.numel();
        Ok(Tensor::from_op(
            out,
            out_shape,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; n];
                gx[start * inner..end * inner].copy_from_slice(g);
                vec![Some(gx)]
            }),
        ))
    }

    /// Concatenates along the first axis.
    pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
        let Some(first) = parts.first() else {
            return Err(Error::Shape("concat_rows of nothing".into()));
        };
        if first.shape().is_empty() {
            return Err(Error::Shape("concat_rows on scalars".into()));
        }
        let tail = first.shape()[1..].to_vec();
        for p in parts {
            if p.shape().len() != first.shape().len() || p.shape()[1..] != tail[..] {
                return Err(Error::Shape(format!(
                    "concat_rows: {:?} vs {:?}",
                    first.shape(),
                    p.shape()
                )));
            }
        }
        let mut out = Vec::new();
        let mut sizes = Vec::with_capacity(parts.len());
        let mut rows = 0;
        for p in parts {
            out.extend_from_slice(&p.data());
            sizes.push(p.numel());
            rows += p.shape()[0];
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        Ok(Tensor::from_op(
            out,
            shape,
            parts.to_vec(),
            Box::new(move |g, _, _| {
                let mut offset = 0;
                sizes
                    .iter()
                    .map(|&n| {
                        let part = g[offset..offset + n].to_vec();
                        offset += n;
                        Some(part)
                    })
                    .collect()
            }),
        ))
    }

    /// Gathers columns of a `[D, T]` tensor; indices may repeat.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Tensor> {
        let (d, t) = match self.shape() {
            [d, t] => (*d, *t),
            s => return Err(Error::Shape(format!("select_columns on {s:?}"))),
        };
        if let Some(&bad) = indices.iter().find(|&&i| i >= t) {
            return Err(Error::Shape(format!("select_columns: index {bad} >= {t}")));
        }
        let n = indices.len();
        let idx = indices.to_vec();
        let mut out = vec![0.0; d * n];
        {
            let x = self.data();
            for r in 0..d {
                for (j, &c) in idx.iter().enumerate() {
                    out[r * n + j] = x[r * t + c];
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![d, n],
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; d * t];
                for r in 0..d {
                    for (j, &c) in idx.iter().enumerate() {
                        gx[r * t + c] += g[r * n + j];
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Column-wise cosine similarity of two `[D, T]` tensors, giving `[T]`.
    /// Each norm gets [`COSINE_EPS`] added, so a zero column scores 0.
    pub fn cosine_columns(&self, other: &Tensor) -> Result<Tensor> {
        same_shape(self, other, "cosine_columns")?;
        let (d, t) = match self.shape() {
            [d, t] => (*d, *t),
            [d] => (*d, 1),
            s => return Err(Error::Shape(format!("cosine_columns on {s:?}"))),
        };
        let mut out = vec![0.0; t];
        {
            let (a, b) = (self.data(), other.data());
            for (c, o) in out.iter_mut().enumerate() {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for r in 0..d {
                    let (x, y) = (a[r * t + c], b[r * t + c]);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                *o = dot / ((na.sqrt() + COSINE_EPS) * (nb.sqrt() + COSINE_EPS));
            }
        }
        let shape = if self.shape().len() == 1 { Vec::new() } else { vec![t] };
        Ok(Tensor::from_op(
            out,
            shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, parents| {
                let (a, b) = (parents[0].data(), parents[1].data());
                let mut ga = vec![0.0; d * t];
                let mut gb = vec![0.0; d * t];
                for c in 0..t {
                    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                    for r in 0..d {
                        let (x, y) = (a[r * t + c], b[r * t + c]);
                        dot += x * y;
                        na += x * x;
                        nb += y * y;
                    }
                    let (na, nb) = (na.sqrt(), nb.sqrt());
                    let (da, db) = (na + COSINE_EPS, nb + COSINE_EPS);
                    let denom = da * db;
                    // d/dx [dot / ((|x|+e)(|y|+e))] = y/denom - dot * x / (|x| (|x|+e)^2 (|y|+e))
                    let ka = if na > 0.0 { dot / (na * da * denom) } else { 0.0 };
                    let kb = if nb > 0.0 { dot / (nb * db * denom) } else { 0.0 };
                    for r in 0..d {
                        let (x, y) = (a[r * t + c], b[r * t + c]);
                        ga[r * t + c] = g[c] * (y / denom - ka * x);
                        gb[r * t + c] = g[c] * (x / denom - kb * y);
                    }
                }
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    /// Mean over rows of `-log softmax(logits[row])[target[row]]` for a
    /// `[A, C]` logit matrix, computed with log-sum-exp.
    pub fn softmax_cross_entropy(&self, targets: &[usize]) -> Result<Tensor> {
        let (a, c) = match self.shape() {
            [a, c] if *a == targets.len() && *c > 0 => (*a, *c),
            s => {
                return Err(Error::Shape(format!(
                    "softmax_cross_entropy: logits {s:?} with {} targets",
                    targets.len()
                )))
            }
        };
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::Shape(format!("target {bad} >= {c} classes")));
        }
        let targets = targets.to_vec();
        let mut probs = vec![0.0; a * c];
        let mut loss = 0.0;
        {
            let x = self.data();
            for r in 0..a {
                let row = &x[r * c..(r + 1) * c];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                loss += lse - row[targets[r]];
                for j in 0..c {
                    probs[r * c + j] = (row[j] - lse).exp();
                }
            }
        }
        let scale = 1.0 / a.max(1) as f64;
        Ok(Tensor::from_op(
            vec![loss * scale],
            Vec::new(),
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    gx[r * c + t] -= 1.0;
                }
                gx.iter_mut().for_each(|v| *v *= g[0] * scale);
                vec![Some(gx)]
            }),
        ))
    }

    /// `[C, T] -> [C, 1]` mean over time; gradient spreads uniformly.
    pub fn adaptive_avg_pool_to_1(&self) -> Result<Tensor> {
        let (c, t) = match self.shape() {
            [c, t] if *t > 0 => (*c, *t),
            s => return Err(Error::Shape(format!("adaptive_avg_pool_to_1 on {s:?}"))),
        };
        let out = {
            let x = self.data();
            (0..c)
                .map(|r| x[r * t..(r + 1) * t].iter().sum::<f64>() / t as f64)
                .collect()
        };
        Ok(Tensor::from_op(
            out,
            vec![c, 1],
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; c * t];
                for r in 0..c {
                    let v = g[r] / t as f64;
                    gx[r * t..(r + 1) * t].iter_mut().for_each(|x| *x = v);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Nearest-neighbour resampling of `[C, t]` to `[C, len]`: output column
    /// `i` copies source column `floor(i * t / len)`. Gradients route back to
    /// the source column.
    pub fn upsample_nearest(&self, len: usize) -> Result<Tensor> {
        let (c, t) = match self.shape() {
            [c, t] if *t > 0 => (*c, *t),
            s => return Err(Error::Shape(format!("upsample_nearest on {s:?}"))),
        };
        if len == 0 {
            return Err(Error::InvalidArgument("upsample_nearest to length 0".into()));
        }
        let src: Vec<usize> = (0..len).map(|i| i * t / len).collect();
        let mut out = vec![0.0; c * len];
        {
            let x = self.data();
            for r in 0..c {
                for (i, &s) in src.iter().enumerate() {
                    out[r * len + i] = x[r * t + s];
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![c, len],
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0; c * t];
                for r in 0..c {
                    for (i, &s) in src.iter().enumerate() {
                        gx[r * t + s] += g[r * len + i];
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Normalizes each frame of a `[B, C, T]` tensor across its channels,
    /// then applies a per-channel gain and shift.
    pub fn layer_norm_channels(&self, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
        const EPS: f64 = 1e-5;
        let (b, c, t) = match self.shape() {
            [b, c, t] if gamma.numel() == *c && beta.numel() == *c => (*b, *c, *t),
            s => return Err(Error::Shape(format!("layer_norm_channels on {s:?}"))),
        };
        let mut normed = vec![0.0; b * c * t];
        let mut inv_std = vec![0.0; b * t];
        let mut out = vec![0.0; b * c * t];
        {
            let (x, gm, bt) = (self.data(), gamma.data(), beta.data());
            for bi in 0..b {
                let base = bi * c * t;
                for ti in 0..t {
                    let mean = (0..c).map(|ci| x[base + ci * t + ti]).sum::<f64>() / c as f64;
                    let var = (0..c)
                        .map(|ci| (x[base + ci * t + ti] - mean).powi(2))
                        .sum::<f64>()
                        / c as f64;
                    let is = 1.0 / (var + EPS).sqrt();
                    inv_std[bi * t + ti] = is;
                    for ci in 0..c {
                        let idx = base + ci * t + ti;
                        normed[idx] = (x[idx] - mean) * is;
                        out[idx] = normed[idx] * gm[ci] + bt[ci];
                    }
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![b, c, t],
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g, _, parents| {
                let gm = parents[1].data();
                let mut gx = vec![0.0; b * c * t];
                let mut ggamma = vec![0.0; c];
                let mut gbeta = vec![0.0; c];
                for bi in 0..b {
                    let base = bi * c * t;
                    for ti in 0..t {
                        let is = inv_std[bi * t + ti];
                        let mut sum_gn = 0.0;
                        let mut sum_gn_n = 0.0;
                        for ci in 0..c {
                            let idx = base + ci * t + ti;
                            ggamma[ci] += g[idx] * normed[idx];
                            gbeta[ci] += g[idx];
                            let gn = g[idx] * gm[ci];
                            sum_gn += gn;
                            sum_gn_n += gn * normed[idx];
                        }
                        let cf = c as f64;
                        for ci in 0..c {
                            let idx = base + ci * t + ti;
                            let gn = g[idx] * gm[ci];
                            gx[idx] = is * (gn - sum_gn / cf - normed[idx] * sum_gn_n / cf);
                        }
                    }
                }
                vec![Some(gx), Some(ggamma), Some(gbeta)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn square_grad_at_three() {
        let x = Tensor::param(vec![3.0], &[1]);
        x.square().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![6.0]);
    }

    #[test]
    fn sum_grad_is_ones() {
        let x = Tensor::param(vec![0.5, -1.0, 2.0, 7.0], &[4]);
        x.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn cosine_of_unit_and_diagonal() {
        let a = Tensor::new(vec![1.0, 0.0], &[2]);
        let b = Tensor::new(vec![1.0, 1.0], &[2]);
        let c = a.cosine_columns(&b).unwrap().item();
        assert!(close(c, 1.0 / 2f64.sqrt(), 1e-7));
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        let a = Tensor::param(vec![0.0, 0.0], &[2]);
        let b = Tensor::new(vec![1.0, 1.0], &[2]);
        let c = a.cosine_columns(&b).unwrap();
        assert_eq!(c.item(), 0.0);
        c.backward().unwrap();
        assert!(a.grad().unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn pool_two_channels() {
        let x = Tensor::new(vec![1.0, 3.0, 2.0, 4.0], &[2, 2]);
        let p = x.adaptive_avg_pool_to_1().unwrap();
        assert_eq!(p.shape(), &[2, 1]);
        assert_eq!(p.to_vec(), vec![2.0, 3.0]);
    }

    #[test]
    fn upsample_replicates() {
        let x = Tensor::new(vec![5.0], &[1, 1]);
        let u = x.upsample_nearest(3).unwrap();
        assert_eq!(u.to_vec(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn pool_then_upsample_preserves_channel_means() {
        let x = Tensor::new(vec![1.0, 2.0, 6.0, -1.0, 0.5, 3.0], &[2, 3]);
        let u = x.adaptive_avg_pool_to_1().unwrap().upsample_nearest(7).unwrap();
        let row_means: Vec<f64> = u.data().chunks(7).map(|r| r.iter().sum::<f64>() / 7.0).collect();
        assert!(close(row_means[0], 3.0, 1e-12));
        assert!(close(row_means[1], 2.5 / 3.0, 1e-12));
    }

    #[test]
    fn upsample_routes_gradient_to_source() {
        let x = Tensor::param(vec![1.0, 2.0], &[1, 2]);
        let u = x.upsample_nearest(5).unwrap();
        u.sum().backward().unwrap();
        // columns 0,1,2 -> 0 ; 3,4 -> 1
        assert_eq!(x.grad().unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn cross_entropy_symmetric_case() {
        let logits = Tensor::new(vec![0.3, 0.3], &[1, 2]);
        let l = logits.softmax_cross_entropy(&[0]).unwrap().item();
        assert!(close(l, 2f64.ln(), 1e-12));
    }

    #[test]
    fn straight_through_passes_gradient() {
        let x = Tensor::param(vec![0.4, -1.6], &[2]);
        let q = x.straight_through(f64::round);
        assert_eq!(q.to_vec(), vec![0.0, -2.0]);
        q.scale(3.0).sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn scalar_broadcast_mul() {
        let x = Tensor::param(vec![1.0, 2.0, 3.0], &[3]);
        let s = Tensor::param(vec![2.0], &[1]);
        let y = x.mul(&s).unwrap();
        assert_eq!(y.to_vec(), vec![2.0, 4.0, 6.0]);
        y.sum().backward().unwrap();
        assert_eq!(s.grad().unwrap(), vec![6.0]);
        assert_eq!(x.grad().unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn mismatched_add_is_an_error() {
        let a = Tensor::new(vec![1.0, 2.0], &[2]);
        let b = Tensor::new(vec![1.0, 2.0, 3.0], &[3]);
        assert!(a.add(&b).is_err());
    }
}
