//! Forward and backward kernels. Shapes are validated by the caller in `tape.rs`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (batch, inp) = (x.shape()[0], x.shape()[1]);
    let out = w.shape()[1];
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut y = vec![0.0; batch * out];
    for n in 0..batch {
        let row = &mut y[n * out..(n + 1) * out];
        row.copy_from_slice(bd);
        for i in 0..inp {
            let xv = xd[n * inp + i];
            let wrow = &wd[i * out..(i + 1) * out];
            for (acc, &wv) in row.iter_mut().zip(wrow) {
                *acc += xv * wv;
            }
        }
    }
    Tensor::from_parts(vec![batch, out], y)
}

/// Returns `(dx, dw, db)`.
pub(crate) fn linear_backward(x: &Tensor, w: &Tensor, g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (batch, inp) = (x.shape()[0], x.shape()[1]);
    let out = w.shape()[1];
    let (xd, wd) = (x.data(), w.data());
    let mut dx = vec![0.0; batch * inp];
    let mut dw = vec![0.0; inp * out];
    let mut db = vec![0.0; out];
    for n in 0..batch {
        let grow = &g[n * out..(n + 1) * out];
        for (acc, &gv) in db.iter_mut().zip(grow) {
            *acc += gv;
        }
        for i in 0..inp {
            let wrow = &wd[i * out..(i + 1) * out];
            dx[n * inp + i] = wrow.iter().zip(grow).map(|(a, b)| a * b).sum();
            let xv = xd[n * inp + i];
            for (acc, &gv) in dw[i * out..(i + 1) * out].iter_mut().zip(grow) {
                *acc += xv * gv;
            }
        }
    }
    (dx, dw, db)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub stride: usize,
    pub pad: usize,
}

/// Output length of a convolution along one axis.
pub fn conv_output_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::shape("conv2d", "stride must be positive"));
    }
    let padded = input + 2 * pad;
    if padded < kernel || !(padded - kernel).is_multiple_of(stride) {
        return Err(Error::shape(
            "conv2d",
            format!("(input {input} + 2*pad {pad} - kernel {kernel}) is not a non-negative multiple of stride {stride}"),
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

pub(crate) fn conv_geom(x: &Tensor, k: &Tensor, stride: usize, pad: usize) -> Result<ConvGeom> {
    if x.rank() != 4 || k.rank() != 4 {
        return Err(Error::shape(
            "conv2d",
            format!(
                "expected rank-4 input and kernel, got {:?} and {:?}",
                x.shape(),
                k.shape()
            ),
        ));
    }
    let (xs, ks) = (x.shape(), k.shape());
    if xs[1] != ks[1] {
        return Err(Error::shape(
            "conv2d",
            format!("input has {} channels, kernel expects {}", xs[1], ks[1]),
        ));
    }
    Ok(ConvGeom {
        batch: xs[0],
        in_c: xs[1],
        in_h: xs[2],
        in_w: xs[3],
        out_c: ks[0],
        k_h: ks[2],
        k_w: ks[3],
        out_h: conv_output_dim(xs[2], ks[2], stride, pad)?,
        out_w: conv_output_dim(xs[3], ks[3], stride, pad)?,
        stride,
        pad,
    })
}

/// Input coordinate read by output index `o` and kernel tap `k`, if inside the image.
#[inline]
fn src_index(o: usize, k: usize, stride: usize, pad: usize, limit: usize) -> Option<usize> {
    let pos = (o * stride + k).checked_sub(pad)?;
    (pos < limit).then_some(pos)
}

pub(crate) fn conv2d_forward(x: &Tensor, k: &Tensor, g: ConvGeom) -> Tensor {
    let (xd, kd) = (x.data(), k.data());
    let mut y = vec![0.0; g.batch * g.out_c * g.out_h * g.out_w];
    let in_plane = g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    for n in 0..g.batch {
        for f in 0..g.out_c {
            let yp = &mut y[(n * g.out_c + f) * out_plane..][..out_plane];
            for c in 0..g.in_c {
                let xp = &xd[(n * g.in_c + c) * in_plane..][..in_plane];
                let kp = &kd[(f * g.in_c + c) * g.k_h * g.k_w..][..g.k_h * g.k_w];
                for oy in 0..g.out_h {
                    for ky in 0..g.k_h {
                        let Some(iy) = src_index(oy, ky, g.stride, g.pad, g.in_h) else {
                            continue;
                        };
                        for ox in 0..g.out_w {
                            let mut acc = 0.0;
                            for kx in 0..g.k_w {
                                if let Some(ix) = src_index(ox, kx, g.stride, g.pad, g.in_w) {
                                    acc += xp[iy * g.in_w + ix] * kp[ky * g.k_w + kx];
                                }
                            }
                            yp[oy * g.out_w + ox] += acc;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_parts(vec![g.batch, g.out_c, g.out_h, g.out_w], y)
}

/// Returns `(dx, dk)`.
pub(crate) fn conv2d_backward(
    x: &Tensor,
    k: &Tensor,
    gy: &[f64],
    g: ConvGeom,
) -> (Vec<f64>, Vec<f64>) {
    let (xd, kd) = (x.data(), k.data());
    let mut dx = vec![0.0; x.numel()];
    let mut dk = vec![0.0; k.numel()];
    let in_plane = g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    let k_plane = g.k_h * g.k_w;
    for n in 0..g.batch {
        for f in 0..g.out_c {
            let gp = &gy[(n * g.out_c + f) * out_plane..][..out_plane];
            for c in 0..g.in_c {
                let x_off = (n * g.in_c + c) * in_plane;
                let k_off = (f * g.in_c + c) * k_plane;
                for oy in 0..g.out_h {
                    for ky in 0..g.k_h {
                        let Some(iy) = src_index(oy, ky, g.stride, g.pad, g.in_h) else {
                            continue;
                        };
                        for ox in 0..g.out_w {
                            let go = gp[oy * g.out_w + ox];
                            for kx in 0..g.k_w {
                                if let Some(ix) = src_index(ox, kx, g.stride, g.pad, g.in_w) {
                                    let xi = x_off + iy * g.in_w + ix;
                                    let ki = k_off + ky * g.k_w + kx;
                                    dk[ki] += go * xd[xi];
                                    dx[xi] += go * kd[ki];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dk)
}

pub(crate) fn avgpool2d_forward(x: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let s = x.shape();
    let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
    let (th, tw) = (h / out_h, w / out_w);
    let scale = 1.0 / (th * tw) as f64;
    let xd = x.data();
    let mut y = vec![0.0; planes * out_h * out_w];
    for p in 0..planes {
        let xp = &xd[p * h * w..][..h * w];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = 0.0;
                for iy in oy * th..(oy + 1) * th {
                    for ix in ox * tw..(ox + 1) * tw {
                        acc += xp[iy * w + ix];
                    }
                }
                y[(p * out_h + oy) * out_w + ox] = acc * scale;
            }
        }
    }
    Tensor::from_parts(vec![s[0], s[1], out_h, out_w], y)
}

pub(crate) fn avgpool2d_backward(
    in_shape: &[usize],
    out_h: usize,
    out_w: usize,
    gy: &[f64],
) -> Vec<f64> {
    let (planes, h, w) = (in_shape[0] * in_shape[1], in_shape[2], in_shape[3]);
    let (th, tw) = (h / out_h, w / out_w);
    let scale = 1.0 / (th * tw) as f64;
    let mut dx = vec![0.0; planes * h * w];
    for p in 0..planes {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let gv = gy[(p * out_h + oy) * out_w + ox] * scale;
                for iy in oy * th..(oy + 1) * th {
                    for ix in ox * tw..(ox + 1) * tw {
                        dx[p * h * w + iy * w + ix] = gv;
                    }
                }
            }
        }
    }
    dx
}

/// Writes `log softmax(z / t)` into `out`, subtracting the row maximum first.
pub(crate) fn log_softmax_row(z: &[f64], t: f64, out: &mut [f64]) {
    let (arg, max) =
        z.iter()
            .map(|&v| v / t)
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |(i, m), (j, v)| if v > m { (j, v) } else { (i, m) },
            );
    // the max term contributes exactly 1; ln_1p keeps the rest when it is tiny
    let rest: f64 = z
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != arg)
        .map(|(_, &v)| (v / t - max).exp())
        .sum();
    let log_norm = rest.ln_1p();
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v / t - max) - log_norm;
    }
}

fn softmax_row(z: &[f64], t: f64, out: &mut [f64]) {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v / t));
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v / t - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "temperature must be positive, got {t}"
        )))
    }
}

fn rows_of(x: &Tensor) -> Result<(usize, usize)> {
    match x.shape() {
        [b, k] => Ok((*b, *k)),
        other => Err(Error::shape(
            "softmax",
            format!("expected [B, K], got {other:?}"),
        )),
    }
}

/// Row-wise `softmax(logits / t)` for a `[B, K]` tensor.
pub fn softmax_rows(logits: &Tensor, t: f64) -> Result<Tensor> {
    check_temperature(t)?;
    let (b, k) = rows_of(logits)?;
    let mut out = vec![0.0; b * k];
    for (zr, or) in logits.data().chunks(k).zip(out.chunks_mut(k)) {
        softmax_row(zr, t, or);
    }
    Ok(Tensor::from_parts(vec![b, k], out))
}

/// Row-wise `log softmax(logits / t)` for a `[B, K]` tensor.
pub fn log_softmax_rows(logits: &Tensor, t: f64) -> Result<Tensor> {
    check_temperature(t)?;
    let (b, k) = rows_of(logits)?;
    let mut out = vec![0.0; b * k];
    for (zr, or) in logits.data().chunks(k).zip(out.chunks_mut(k)) {
        log_softmax_row(zr, t, or);
    }
    Ok(Tensor::from_parts(vec![b, k], out))
}

pub(crate) fn softmax_backward(s: &Tensor, t: f64, gy: &[f64]) -> Vec<f64> {
    let k = s.shape()[1];
    let mut dx = vec![0.0; s.numel()];
    for ((sr, gr), dr) in s.data().chunks(k).zip(gy.chunks(k)).zip(dx.chunks_mut(k)) {
        let dot: f64 = sr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((d, &sv), &gv) in dr.iter_mut().zip(sr).zip(gr) {
            *d = sv * (gv - dot) / t;
        }
    }
    dx
}

/// Mean over rows of `-sum_k p[k] * log q[k]`, `q = softmax(z / t)`.
pub(crate) fn soft_ce_forward(z: &Tensor, target: &Tensor, t: f64) -> f64 {
    let k = z.shape()[1];
    let batch = z.shape()[0];
    let mut logq = vec![0.0; k];
    let mut total = 0.0;
    for (zr, pr) in z.data().chunks(k).zip(target.data().chunks(k)) {
        log_softmax_row(zr, t, &mut logq);
        total -= pr.iter().zip(&logq).map(|(p, l)| p * l).sum::<f64>();
    }
    total / batch as f64
}

pub(crate) fn soft_ce_backward(z: &Tensor, target: &Tensor, t: f64, upstream: f64) -> Vec<f64> {
    let k = z.shape()[1];
    let batch = z.shape()[0];
    let scale = upstream / (batch as f64 * t);
    let mut q = vec![0.0; k];
    let mut dz = vec![0.0; z.numel()];
    for ((zr, pr), dr) in z
        .data()
        .chunks(k)
        .zip(target.data().chunks(k))
        .zip(dz.chunks_mut(k))
    {
        softmax_row(zr, t, &mut q);
        let mass: f64 = pr.iter().sum();
        for ((d, &qv), &pv) in dr.iter_mut().zip(&q).zip(pr) {
            *d = (qv * mass - pv) * scale;
        }
    }
    dz
}

/// Mean over rows of `KL(p_s || p_t)` given source log-probabilities.
pub(crate) fn kl_forward(z: &Tensor, source_logp: &Tensor, t: f64) -> f64 {
    let k = z.shape()[1];
    let batch = z.shape()[0];
    let mut logq = vec![0.0; k];
    let mut total = 0.0;
    for (zr, lpr) in z.data().chunks(k).zip(source_logp.data().chunks(k)) {
        log_softmax_row(zr, t, &mut logq);
        total += lpr
            .iter()
            .zip(&logq)
            .map(|(&lp, &lq)| lp.exp() * (lp - lq))
            .sum::<f64>();
    }
    total / batch as f64
}

pub(crate) fn kl_backward(z: &Tensor, source_logp: &Tensor, t: f64, upstream: f64) -> Vec<f64> {
    let k = z.shape()[1];
    let batch = z.shape()[0];
    let scale = upstream / (batch as f64 * t);
    let mut q = vec![0.0; k];
    let mut dz = vec![0.0; z.numel()];
    for ((zr, lpr), dr) in z
        .data()
        .chunks(k)
        .zip(source_logp.data().chunks(k))
        .zip(dz.chunks_mut(k))
    {
        softmax_row(zr, t, &mut q);
        let mass: f64 = lpr.iter().map(|lp| lp.exp()).sum();
        for ((d, &qv), &lp) in dr.iter_mut().zip(&q).zip(lpr) {
            *d = (qv * mass - lp.exp()) * scale;
        }
    }
    dz
}

#[inline]
/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean of `max(z,0) - z*y + ln(1 + exp(-|z|))` over all entries.
pub(crate) fn bce_forward(z: &Tensor, y: &Tensor) -> f64 {
    let total: f64 = z
        .data()
        .iter()
        .zip(y.data())
        .map(|(&zv, &yv)| zv.max(0.0) - zv * yv + (-zv.abs()).exp().ln_1p())
        .sum();
    total / z.numel() as f64
}

pub(crate) fn bce_backward(z: &Tensor, y: &Tensor, upstream: f64) -> Vec<f64> {
    let scale = upstream / z.numel() as f64;
    z.data()
        .iter()
        .zip(y.data())
        .map(|(&zv, &yv)| (sigmoid(zv) - yv) * scale)
        .collect()
}
