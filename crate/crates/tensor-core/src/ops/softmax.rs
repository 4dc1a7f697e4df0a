//! Softmax over the trailing two (spatial) dimensions.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Normalizes each H*W map to a probability distribution over pixels.
///
/// Works on any tensor of rank >= 3; all leading dimensions index maps.
/// The maximum logit is subtracted before exponentiation, so the output is
/// invariant to logit shifts and safe against overflow.
pub fn spatial_softmax(input: &Tensor) -> Result<Tensor> {
    let shape = input.shape();
    if shape.len() < 3 {
        return Err(TensorError::ShapeMismatch(format!(
            "spatial_softmax: need rank >= 3 ([..., H, W]), got {:?}",
            shape
        )));
    }
    let width = shape[shape.len() - 1];
    let height = shape[shape.len() - 2];
    let plane = height * width;
    let maps = input.numel() / plane;

    let mut out = vec![0.0; input.numel()];
    {
        let x = input.data();
        for m in 0..maps {
            let src = &x[m * plane..][..plane];
            let dst = &mut out[m * plane..][..plane];
            let max = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (d, v) in dst.iter_mut().zip(src) {
                *d = (v - max).exp();
                total += *d;
            }
            for d in dst.iter_mut() {
                *d /= total;
            }
        }
    }

    let pin = input.clone();
    let y = out.clone();
    Ok(Tensor::from_op(
        shape.to_vec(),
        out,
        vec![input.clone()],
        Box::new(move |g| {
            // dx_i = y_i * (g_i - sum_j g_j y_j), per map.
            let mut d_in = vec![0.0; pin.numel()];
            for m in 0..maps {
                let ys = &y[m * plane..][..plane];
                let gs = &g[m * plane..][..plane];
                let dot: f64 = ys.iter().zip(gs).map(|(yv, gv)| yv * gv).sum();
                for ((d, yv), gv) in d_in[m * plane..][..plane].iter_mut().zip(ys).zip(gs) {
                    *d = yv * (gv - dot);
                }
            }
            pin.accumulate_grad(&d_in);
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_is_uniform() {
        let x = Tensor::from_vec(&[1, 1, 2, 3], vec![4.2; 6]).unwrap();
        let y = spatial_softmax(&x).unwrap();
        for v in y.to_vec() {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_invariance() {
        let vals = vec![0.3, -1.2, 5.0, 2.2, 0.0, -3.0];
        let x = Tensor::from_vec(&[1, 1, 2, 3], vals.clone()).unwrap();
        let shifted =
            Tensor::from_vec(&[1, 1, 2, 3], vals.iter().map(|v| v + 123.456).collect()).unwrap();
        let a = spatial_softmax(&x).unwrap().to_vec();
        let b = spatial_softmax(&shifted).unwrap().to_vec();
        for (av, bv) in a.iter().zip(&b) {
            assert!((av - bv).abs() < 1e-12, "{av} vs {bv}");
        }
    }

    #[test]
    fn maps_sum_to_one() {
        let vals: Vec<f64> = (0..2 * 3 * 4 * 4).map(|i| ((i * 37) % 17) as f64 * 0.7 - 4.0).collect();
        let x = Tensor::from_vec(&[2, 3, 4, 4], vals).unwrap();
        let y = spatial_softmax(&x).unwrap();
        let v = y.to_vec();
        for m in 0..6 {
            let s: f64 = v[m * 16..(m + 1) * 16].iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "map {m} sums to {s}");
        }
    }

    #[test]
    fn rank_two_rejected() {
        let x = Tensor::zeros(&[4, 4]);
        assert!(spatial_softmax(&x).is_err());
    }
}
