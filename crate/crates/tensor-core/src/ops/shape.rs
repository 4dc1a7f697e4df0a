//! Shape manipulation: reshape, flatten, channel concatenation.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Reinterprets the buffer under a new shape with the same element count.
pub fn reshape(input: &Tensor, shape: &[usize]) -> Result<Tensor> {
    let numel: usize = shape.iter().product();
    if numel != input.numel() {
        return Err(TensorError::ShapeMismatch(format!(
            "reshape: {:?} ({} elements) -> {:?} ({} elements)",
            input.shape(),
            input.numel(),
            shape,
            numel
        )));
    }
    let pin = input.clone();
    Ok(Tensor::from_op(
        shape.to_vec(),
        input.to_vec(),
        vec![input.clone()],
        Box::new(move |g| pin.accumulate_grad(g)),
    ))
}

/// `[B, C, H, W] -> [B, C*H*W]`.
pub fn flatten(input: &Tensor) -> Result<Tensor> {
    let (batch, channels, height, width) = input.dims4()?;
    reshape(input, &[batch, channels * height * width])
}

/// Concatenates `[B, C_i, H, W]` tensors along the channel axis. All other
/// dimensions must agree; the backward pass splits the gradient back.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(TensorError::Invalid("concat_channels: no operands".into()));
    }
    let (batch, _, height, width) = parts[0].dims4()?;
    let mut channels = Vec::with_capacity(parts.len());
    for p in parts {
        let (b, c, h, w) = p.dims4()?;
        if (b, h, w) != (batch, height, width) {
            return Err(TensorError::ShapeMismatch(format!(
                "concat_channels: {:?} differs from {:?} outside the channel axis",
                p.shape(),
                parts[0].shape()
            )));
        }
        channels.push(c);
    }
    let total_c: usize = channels.iter().sum();
    let plane = height * width;
    let mut out = vec![0.0; batch * total_c * plane];
    for b in 0..batch {
        let mut c_off = 0;
        for (p, &c) in parts.iter().zip(&channels) {
            let src = p.data();
            let n = c * plane;
            out[(b * total_c + c_off) * plane..][..n]
                .copy_from_slice(&src[b * n..][..n]);
            c_off += c;
        }
    }

    let owners: Vec<Tensor> = parts.iter().map(|p| (*p).clone()).collect();
    let splits = channels.clone();
    let parents = owners.clone();
    Ok(Tensor::from_op(
        vec![batch, total_c, height, width],
        out,
        parents,
        Box::new(move |g| {
            for (idx, p) in owners.iter().enumerate() {
                if !p.requires_grad() {
                    continue;
                }
                let c = splits[idx];
                let c_off: usize = splits[..idx].iter().sum();
                let n = c * plane;
                let mut d = vec![0.0; batch * n];
                for b in 0..batch {
                    d[b * n..][..n]
                        .copy_from_slice(&g[(b * total_c + c_off) * plane..][..n]);
                }
                p.accumulate_grad(&d);
            }
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_channel_counts_add() {
        let a = Tensor::zeros(&[1, 2, 3, 3]);
        let b = Tensor::zeros(&[1, 3, 3, 3]);
        let y = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(y.shape(), &[1, 5, 3, 3]);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = Tensor::zeros(&[1, 2, 3, 3]);
        let b = Tensor::zeros(&[1, 2, 4, 3]);
        assert!(matches!(
            concat_channels(&[&a, &b]),
            Err(TensorError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn concat_backward_splits() {
        let a = Tensor::param(&[1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::param(&[1, 2, 1, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = concat_channels(&[&a, &b]).unwrap();
        let weights =
            Tensor::from_vec(&[1, 3, 1, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let loss = crate::ops::sum(&crate::ops::mul(&y, &weights).unwrap()).unwrap();
        crate::backward(&loss).unwrap();
        assert_eq!(a.grad().unwrap(), vec![1.0, 2.0]);
        assert_eq!(b.grad().unwrap(), vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn flatten_keeps_order() {
        let x = Tensor::from_vec(&[1, 2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = flatten(&x).unwrap();
        assert_eq!(y.shape(), &[1, 4]);
        assert_eq!(y.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn batched_concat_interleaves_per_sample() {
        // Two batch elements; ensure each sample's channels stay together.
        let a = Tensor::from_vec(&[2, 1, 1, 1], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1, 1, 1], vec![10.0, 20.0]).unwrap();
        let y = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(y.to_vec(), vec![1.0, 10.0, 2.0, 20.0]);
    }
}
