//! 2x2 max pooling and nearest-neighbor 2x upsampling.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// 2x2 window maximum with stride 2. Ties route the gradient to the first
/// window element in row-major order.
pub fn max_pool2(input: &Tensor) -> Result<Tensor> {
    let (batch, channels, height, width) = input.dims4()?;
    if height % 2 != 0 || width % 2 != 0 {
        return Err(TensorError::OddSpatialDim { height, width });
    }
    let (oh, ow) = (height / 2, width / 2);
    let mut out = vec![0.0; batch * channels * oh * ow];
    let mut argmax = vec![0usize; out.len()];
    {
        let x = input.data();
        let plane = height * width;
        let oplane = oh * ow;
        for bc in 0..batch * channels {
            let src = &x[bc * plane..][..plane];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best_idx = (2 * oy) * width + 2 * ox;
                    let mut best = src[best_idx];
                    // Remaining window elements in row-major order; strict
                    // comparison keeps the first occurrence on ties.
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = (2 * oy + dy) * width + 2 * ox + dx;
                        if src[idx] > best {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                    out[bc * oplane + oy * ow + ox] = best;
                    argmax[bc * oplane + oy * ow + ox] = bc * plane + best_idx;
                }
            }
        }
    }

    let pin = input.clone();
    Ok(Tensor::from_op(
        vec![batch, channels, oh, ow],
        out,
        vec![input.clone()],
        Box::new(move |g| {
            let mut d_in = vec![0.0; pin.numel()];
            for (gv, idx) in g.iter().zip(&argmax) {
                d_in[*idx] += gv;
            }
            pin.accumulate_grad(&d_in);
        }),
    ))
}

/// Nearest-neighbor 2x replication. The backward pass sums the gradient over
/// each replicated 2x2 group.
pub fn upsample2(input: &Tensor) -> Result<Tensor> {
    let (batch, channels, height, width) = input.dims4()?;
    let (oh, ow) = (height * 2, width * 2);
    let mut out = vec![0.0; batch * channels * oh * ow];
    {
        let x = input.data();
        let plane = height * width;
        let oplane = oh * ow;
        for bc in 0..batch * channels {
            let src = &x[bc * plane..][..plane];
            let dst = &mut out[bc * oplane..][..oplane];
            for y in 0..oh {
                let srow = &src[(y / 2) * width..][..width];
                let drow = &mut dst[y * ow..][..ow];
                for x_out in 0..ow {
                    drow[x_out] = srow[x_out / 2];
                }
            }
        }
    }

    let pin = input.clone();
    Ok(Tensor::from_op(
        vec![batch, channels, oh, ow],
        out,
        vec![input.clone()],
        Box::new(move |g| {
            let plane = height * width;
            let oplane = oh * ow;
            let mut d_in = vec![0.0; pin.numel()];
            for bc in 0..batch * channels {
                let gsrc = &g[bc * oplane..][..oplane];
                let ddst = &mut d_in[bc * plane..][..plane];
                for y in 0..oh {
                    let grow = &gsrc[y * ow..][..ow];
                    let drow = &mut ddst[(y / 2) * width..][..width];
                    for x_out in 0..ow {
                        drow[x_out / 2] += grow[x_out];
                    }
                }
            }
            pin.accumulate_grad(&d_in);
        }),
    ))
}
