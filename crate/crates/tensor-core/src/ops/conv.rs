//! Zero-padded "same" 2D convolution.
//!
//! The inner loops accumulate `weight * shifted-input-row` into output rows,
//! which keeps memory access sequential and lets the compiler vectorize.
//! Every output element is accumulated in a fixed (channel, ky, kx) order,
//! so results are bit-deterministic.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

struct ConvDims {
    batch: usize,
    in_ch: usize,
    out_ch: usize,
    height: usize,
    width: usize,
    k: usize,
    pad: usize,
}

fn validate(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<ConvDims> {
    let (batch, in_ch, height, width) = input.dims4()?;
    let (out_ch, kc, kh, kw) = kernel.dims4()?;
    if kh != kw {
        return Err(TensorError::ShapeMismatch(format!(
            "conv2d: kernel must be square, got {kh}x{kw}"
        )));
    }
    if kh % 2 == 0 {
        return Err(TensorError::Invalid(format!(
            "conv2d: kernel size must be odd for same-padding, got {kh}"
        )));
    }
    if kc != in_ch {
        return Err(TensorError::ShapeMismatch(format!(
            "conv2d: input has {in_ch} channels but kernel expects {kc}"
        )));
    }
    if bias.shape() != [out_ch] {
        return Err(TensorError::ShapeMismatch(format!(
            "conv2d: bias shape {:?} does not match {out_ch} output channels",
            bias.shape()
        )));
    }
    if height == 0 || width == 0 {
        return Err(TensorError::ShapeMismatch("conv2d: empty spatial dims".into()));
    }
    Ok(ConvDims { batch, in_ch, out_ch, height, width, k: kh, pad: kh / 2 })
}

/// For a kernel row/col offset `d = k_idx - pad`, the output index range
/// whose shifted input index stays in `[0, n)`.
fn valid_range(d: isize, n: usize) -> (usize, usize) {
    let lo = if d < 0 { (-d) as usize } else { 0 };
    let hi = if d > 0 { n - d as usize } else { n };
    (lo, hi.max(lo))
}

fn forward_values(input: &[f64], kernel: &[f64], bias: &[f64], dm: &ConvDims) -> Vec<f64> {
    let (h, w, k, pad) = (dm.height, dm.width, dm.k, dm.pad);
    let plane = h * w;
    let mut out = vec![0.0; dm.batch * dm.out_ch * plane];
    for b in 0..dm.batch {
        for f in 0..dm.out_ch {
            let out_plane = &mut out[(b * dm.out_ch + f) * plane..][..plane];
            out_plane.fill(bias[f]);
            for c in 0..dm.in_ch {
                let in_plane = &input[(b * dm.in_ch + c) * plane..][..plane];
                for ky in 0..k {
                    let dy = ky as isize - pad as isize;
                    let (y0, y1) = valid_range(dy, h);
                    for kx in 0..k {
                        let weight = kernel[((f * dm.in_ch + c) * k + ky) * k + kx];
                        let dx = kx as isize - pad as isize;
                        let (x0, x1) = valid_range(dx, w);
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let src = &in_plane[iy * w + (x0 as isize + dx) as usize..]
                                [..x1 - x0];
                            let dst = &mut out_plane[y * w + x0..][..x1 - x0];
                            for (o, i) in dst.iter_mut().zip(src) {
                                *o += weight * i;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Same-padded convolution: `input [B,C,H,W]` with `kernel [F,C,k,k]` and
/// `bias [F]` gives `[B,F,H,W]`. Differentiable in all three operands.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let dm = validate(input, kernel, bias)?;
    let out = forward_values(&input.data(), &kernel.data(), &bias.data(), &dm);

    let (pin, pker, pbias) = (input.clone(), kernel.clone(), bias.clone());
    let shape = vec![dm.batch, dm.out_ch, dm.height, dm.width];
    Ok(Tensor::from_op(
        shape,
        out,
        vec![input.clone(), kernel.clone(), bias.clone()],
        Box::new(move |g| {
            let (h, w, k, pad) = (dm.height, dm.width, dm.k, dm.pad);
            let plane = h * w;
            let in_data = pin.data();
            let ker_data = pker.data();

            if pbias.requires_grad() {
                let mut d_bias = vec![0.0; dm.out_ch];
                for b in 0..dm.batch {
                    for f in 0..dm.out_ch {
                        d_bias[f] += g[(b * dm.out_ch + f) * plane..][..plane]
                            .iter()
                            .sum::<f64>();
                    }
                }
                pbias.accumulate_grad(&d_bias);
            }

            if pker.requires_grad() {
                let mut d_ker = vec![0.0; dm.out_ch * dm.in_ch * k * k];
                for f in 0..dm.out_ch {
                    for c in 0..dm.in_ch {
                        for ky in 0..k {
                            let dy = ky as isize - pad as isize;
                            let (y0, y1) = valid_range(dy, h);
                            for kx in 0..k {
                                let dx = kx as isize - pad as isize;
                                let (x0, x1) = valid_range(dx, w);
                                if x0 >= x1 {
                                    continue;
                                }
                                let mut acc = 0.0;
                                for b in 0..dm.batch {
                                    let g_plane = &g[(b * dm.out_ch + f) * plane..][..plane];
                                    let in_plane =
                                        &in_data[(b * dm.in_ch + c) * plane..][..plane];
                                    for y in y0..y1 {
                                        let iy = (y as isize + dy) as usize;
                                        let grow = &g_plane[y * w + x0..][..x1 - x0];
                                        let irow = &in_plane
                                            [iy * w + (x0 as isize + dx) as usize..]
                                            [..x1 - x0];
                                        for (gv, iv) in grow.iter().zip(irow) {
                                            acc += gv * iv;
                                        }
                                    }
                                }
                                d_ker[((f * dm.in_ch + c) * k + ky) * k + kx] = acc;
                            }
                        }
                    }
                }
                pker.accumulate_grad(&d_ker);
            }

            if pin.requires_grad() {
                let mut d_in = vec![0.0; dm.batch * dm.in_ch * plane];
                for b in 0..dm.batch {
                    for c in 0..dm.in_ch {
                        let d_in_plane = &mut d_in[(b * dm.in_ch + c) * plane..][..plane];
                        for f in 0..dm.out_ch {
                            let g_plane = &g[(b * dm.out_ch + f) * plane..][..plane];
                            for ky in 0..k {
                                let dy = ky as isize - pad as isize;
                                let (y0, y1) = valid_range(dy, h);
                                for kx in 0..k {
                                    let weight =
                                        ker_data[((f * dm.in_ch + c) * k + ky) * k + kx];
                                    let dx = kx as isize - pad as isize;
                                    let (x0, x1) = valid_range(dx, w);
                                    if x0 >= x1 {
                                        continue;
                                    }
                                    for y in y0..y1 {
                                        let iy = (y as isize + dy) as usize;
                                        let grow = &g_plane[y * w + x0..][..x1 - x0];
                                        let drow = &mut d_in_plane
                                            [iy * w + (x0 as isize + dx) as usize..]
                                            [..x1 - x0];
                                        for (d, gv) in drow.iter_mut().zip(grow) {
                                            *d += weight * gv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                pin.accumulate_grad(&d_in);
            }
        }),
    ))
}
