//! 1-D convolution and transposed convolution over `[B, C, T]` tensors.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Zero padding applied to either end of the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub const NONE: Padding = Padding { left: 0, right: 0 };

    pub fn symmetric(p: usize) -> Padding {
        Padding { left: p, right: p }
    }

    /// Padding that makes a strided convolution emit `ceil(t / stride)`
    /// frames.
    pub fn same_ceil(t: usize, kernel: usize, stride: usize) -> Padding {
        let t_out = t.div_ceil(stride);
        let needed = ((t_out.saturating_sub(1)) * stride + kernel).saturating_sub(t);
        Padding {
            left: needed / 2,
            right: needed - needed / 2,
        }
    }
}

/// Output frame count for a valid convolution over `t` padded samples.
pub fn conv_output_len(t: usize, kernel: usize, stride: usize, pad: Padding) -> Option<usize> {
    let padded = t + pad.left + pad.right;
    (padded >= kernel && stride > 0).then(|| (padded - kernel) / stride + 1)
}

impl Tensor {
    /// `input [B, C_in, T]`, `weight [C_out, C_in, K]`, optional
    /// `bias [C_out]` -> `[B, C_out, T_out]` with
    /// `T_out = floor((T + pad - K) / stride) + 1`.
    pub fn conv1d(
        &self,
        weight: &Tensor,
        bias: Option<&Tensor>,
        stride: usize,
        pad: Padding,
    ) -> Result<Tensor> {
        let (b, c_in, t) = match self.shape() {
            [b, c, t] => (*b, *c, *t),
            s => return Err(Error::Shape(format!("conv1d input {s:?}"))),
        };
        let (c_out, k) = match weight.shape() {
            [o, i, k] if *i == c_in && *k > 0 => (*o, *k),
            s => {
                return Err(Error::Shape(format!(
                    "conv1d weight {s:?} for {c_in} input channels"
                )))
            }
        };
        if let Some(bias) = bias {
            if bias.numel() != c_out {
                return Err(Error::Shape(format!("conv1d bias {:?}", bias.shape())));
            }
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv1d stride 0".into()));
        }
        let t_out = conv_output_len(t, k, stride, pad).ok_or_else(|| {
            Error::Shape(format!("conv1d: length {t} shorter than kernel {k}"))
        })?;
        let tp = t + pad.left + pad.right;

        let padded = pad_time(&self.data(), b * c_in, t, pad);
        let mut out = vec![0.0; b * c_out * t_out];
        {
            let w = weight.data();
            for bi in 0..b {
                for co in 0..c_out {
                    let row = &mut out[(bi * c_out + co) * t_out..(bi * c_out + co + 1) * t_out];
                    if let Some(bias) = bias {
                        let bv = bias.data()[co];
                        row.iter_mut().for_each(|v| *v = bv);
                    }
                    for ci in 0..c_in {
                        let xrow = &padded[(bi * c_in + ci) * tp..(bi * c_in + ci + 1) * tp];
                        let wrow = &w[(co * c_in + ci) * k..(co * c_in + ci + 1) * k];
                        accumulate_conv_row(row, xrow, wrow, stride);
                    }
                }
            }
        }

        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(bias) = bias {
            parents.push(bias.clone());
        }
        let has_bias = bias.is_some();
        Ok(Tensor::from_op(
            out,
            vec![b, c_out, t_out],
            parents,
            Box::new(move |g, _, parents| {
                let w = parents[1].data();
                let need_x = parents[0].requires_grad();
                let need_w = parents[1].requires_grad();
                let x_padded = need_w.then(|| pad_time(&parents[0].data(), b * c_in, t, pad));
                let mut gx_pad = vec![0.0; if need_x { b * c_in * tp } else { 0 }];
                let mut gw = vec![0.0; if need_w { c_out * c_in * k } else { 0 }];
                for bi in 0..b {
                    for co in 0..c_out {
                        let grow = &g[(bi * c_out + co) * t_out..(bi * c_out + co + 1) * t_out];
                        for ci in 0..c_in {
                            let woff = (co * c_in + ci) * k;
                            let xoff = (bi * c_in + ci) * tp;
                            for kk in 0..k {
                                if need_x {
                                    let wv = w[woff + kk];
                                    let gxrow = &mut gx_pad[xoff..xoff + tp];
                                    for (to, &gv) in grow.iter().enumerate() {
                                        gxrow[to * stride + kk] += wv * gv;
                                    }
                                }
                                if let Some(xp) = &x_padded {
                                    let xrow = &xp[xoff..xoff + tp];
                                    let mut acc = 0.0;
                                    for (to, &gv) in grow.iter().enumerate() {
                                        acc += gv * xrow[to * stride + kk];
                                    }
                                    gw[woff + kk] += acc;
                                }
                            }
                        }
                    }
                }
                let gx = need_x.then(|| unpad_time(&gx_pad, b * c_in, t, pad));
                let mut grads = vec![gx, need_w.then_some(gw)];
                if has_bias {
                    let mut gb = vec![0.0; c_out];
                    for bi in 0..b {
                        for (co, slot) in gb.iter_mut().enumerate() {
                            *slot += g[(bi * c_out + co) * t_out..(bi * c_out + co + 1) * t_out]
                                .iter()
                                .sum::<f64>();
                        }
                    }
                    grads.push(Some(gb));
                }
                grads
            }),
        ))
    }

    /// `input [B, C_in, T]`, `weight [C_in, C_out, K]` ->
    /// `[B, C_out, (T - 1) * stride + K]`. Callers crop with
    /// [`Tensor::slice_last`].
    pub fn conv_transpose1d(&self, weight: &Tensor, bias: Option<&Tensor>, stride: usize) -> Result<Tensor> {
        let (b, c_in, t) = match self.shape() {
            [b, c, t] if *t > 0 => (*b, *c, *t),
            s => return Err(Error::Shape(format!("conv_transpose1d input {s:?}"))),
        };
        let (c_out, k) = match weight.shape() {
            [i, o, k] if *i == c_in && *k > 0 => (*o, *k),
            s => {
                return Err(Error::Shape(format!(
                    "conv_transpose1d weight {s:?} for {c_in} input channels"
                )))
            }
        };
        if let Some(bias) = bias {
            if bias.numel() != c_out {
                return Err(Error::Shape(format!("conv_transpose1d bias {:?}", bias.shape())));
            }
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv_transpose1d stride 0".into()));
        }
        let t_out = (t - 1) * stride + k;
        let mut out = vec![0.0; b * c_out * t_out];
        {
            let (x, w) = (self.data(), weight.data());
            for bi in 0..b {
                for co in 0..c_out {
                    let row = &mut out[(bi * c_out + co) * t_out..(bi * c_out + co + 1) * t_out];
                    if let Some(bias) = bias {
                        let bv = bias.data()[co];
                        row.iter_mut().for_each(|v| *v = bv);
                    }
                    for ci in 0..c_in {
                        let xrow = &x[(bi * c_in + ci) * t..(bi * c_in + ci + 1) * t];
                        let wrow = &w[(ci * c_out + co) * k..(ci * c_out + co + 1) * k];
                        for (ti, &xv) in xrow.iter().enumerate() {
                            let dst = &mut row[ti * stride..ti * stride + k];
                            for (d, &wv) in dst.iter_mut().zip(wrow) {
                                *d += xv * wv;
                            }
                        }
                    }
                }
            }
        }

        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(bias) = bias {
            parents.push(bias.clone());
        }
        let has_bias = bias.is_some();
        Ok(Tensor::from_op(
            out,
            vec![b, c_out, t_out],
            parents,
            Box::new(move |g, _, parents| {
                let (x, w) = (parents[0].data(), parents[1].data());
                let need_x = parents[0].requires_grad();
                let need_w = parents[1].requires_grad();
                let mut gx = vec![0.0; if need_x { b * c_in * t } else { 0 }];
                let mut gw = vec![0.0; if need_w { c_in * c_out * k } else { 0 }];
                for bi in 0..b {
                    for co in 0..c_out {
                        let grow = &g[(bi * c_out + co) * t_out..(bi * c_out + co + 1) * t_out];
                        for ci in 0..c_in {
                            let woff = (ci * c_out + co) * k;
                            let xoff = (bi * c_in + ci) * t;
                            for ti in 0..t {
                                let gslice = &grow[ti * stride..ti * stride + k];
                                if need_x {
                                    gx[xoff + ti] += gslice
                                        .iter()
                                        .zip(&w[woff..woff + k])
                                        .map(|(a, b)| a * b)
                                        .sum::<f64>();
                                }
                                if need_w {
                                    let xv = x[xoff + ti];
                                    for (gwv, &gv) in gw[woff..woff + k].iter_mut().zip(gslice) {
                                        *gwv += xv * gv;
                                    }
                                }
                            }
                        }
                    }
                }
                let mut grads = vec![need_x.then_some(gx), need_w.then_some(gw)];
                if has_bias {
                    let mut gb = vec![0.0; c_out];
                    for bi in 0..b {
                        for (co, slot) in gb.iter_mut().enumerate() {
                            *slot += g[(bi * c_out + co) * t_out..(bi * c_out + co + 1) * t_out]
                                .iter()
                                .sum::<f64>();
                        }
                    }
                    grads.push(Some(gb));
                }
                grads
            }),
        ))
    }
}

#[inline]
fn accumulate_conv_row(out: &mut [f64], x: &[f64], w: &[f64], stride: usize) {
    if stride == 1 {
        let n = out.len();
        for (kk, &wv) in w.iter().enumerate() {
            if wv == 0.0 {
                continue;
            }
            for (o, &xv) in out.iter_mut().zip(&x[kk..kk + n]) {
                *o += wv * xv;
            }
        }
    } else {
        for (to, o) in out.iter_mut().enumerate() {
            let base = to * stride;
            *o += w.iter().zip(&x[base..base + w.len()]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

fn pad_time(x: &[f64], rows: usize, t: usize, pad: Padding) -> Vec<f64> {
    if pad == Padding::NONE {
        return x.to_vec();
    }
    let tp = t + pad.left + pad.right;
    let mut out = vec![0.0; rows * tp];
    for r in 0..rows {
        out[r * tp + pad.left..r * tp + pad.left + t].copy_from_slice(&x[r * t..(r + 1) * t]);
    }
    out
}

fn unpad_time(x: &[f64], rows: usize, t: usize, pad: Padding) -> Vec<f64> {
    if pad == Padding::NONE {
        return x.to_vec();
    }
    let tp = t + pad.left + pad.right;
    let mut out = vec![0.0; rows * t];
    for r in 0..rows {
        out[r * t..(r + 1) * t].copy_from_slice(&x[r * tp + pad.left..r * tp + pad.left + t]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_convolution() {
        let x = Tensor::new(vec![1.0, 2.0, 3.0], &[1, 1, 3]);
        let w = Tensor::new(vec![1.0, 1.0], &[1, 1, 2]);
        let b = Tensor::new(vec![0.0], &[1]);
        let y = x.conv1d(&w, Some(&b), 1, Padding::NONE).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2]);
        assert_eq!(y.to_vec(), vec![3.0, 5.0]);
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(vec![0.5, -2.0, 4.0, 1.0], &[1, 1, 4]);
        let w = Tensor::new(vec![1.0], &[1, 1, 1]);
        let y = x.conv1d(&w, None, 1, Padding::NONE).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn kernel_longer_than_input_is_an_error() {
        let x = Tensor::new(vec![1.0], &[1, 1, 1]);
        let w = Tensor::new(vec![1.0, 1.0], &[1, 1, 2]);
        assert!(x.conv1d(&w, None, 1, Padding::NONE).is_err());
    }

    #[test]
    fn same_ceil_padding_lengths() {
        for (t, k, s) in [(16000, 10, 5), (3200, 8, 4), (100, 4, 2), (320, 10, 5), (7, 3, 2)] {
            let p = Padding::same_ceil(t, k, s);
            assert_eq!(conv_output_len(t, k, s, p), Some(t.div_ceil(s)), "{t} {k} {s}");
        }
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> for matching weights
        let x = Tensor::new((0..14).map(|i| (i as f64 * 0.37).sin()).collect(), &[1, 2, 7]);
        let w = Tensor::new((0..18).map(|i| (i as f64 * 0.11).cos()).collect(), &[3, 2, 3]);
        let y = x.conv1d(&w, None, 2, Padding::NONE).unwrap();
        let g = Tensor::new((0..y.numel()).map(|i| i as f64 - 2.0).collect(), y.shape());
        let lhs: f64 = y.data().iter().zip(g.data().iter()).map(|(a, b)| a * b).sum();
        // conv weight [Co, Ci, K] is exactly a transposed-conv weight [Ci_t=Co, Co_t=Ci, K]
        let xt = g.conv_transpose1d(&w, None, 2).unwrap();
        let rhs: f64 = xt.data()[..].chunks(xt.shape()[2])
            .zip(x.data().chunks(7))
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
            .sum();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }
}
