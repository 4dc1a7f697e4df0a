//! Fully connected (affine) layer.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// `input [B,D] x weight [D,K] + bias [K] -> [B,K]`.
pub fn dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, d_in) = match input.shape()[..] {
        [b, d] => (b, d),
        _ => {
            return Err(TensorError::ShapeMismatch(format!(
                "dense: input must be [B,D], got {:?}",
                input.shape()
            )))
        }
    };
    let (d_w, k_out) = match weight.shape()[..] {
        [d, k] => (d, k),
        _ => {
            return Err(TensorError::ShapeMismatch(format!(
                "dense: weight must be [D,K], got {:?}",
                weight.shape()
            )))
        }
    };
    if d_in != d_w {
        return Err(TensorError::ShapeMismatch(format!(
            "dense: input feature dim {d_in} != weight dim {d_w}"
        )));
    }
    if bias.shape() != [k_out] {
        return Err(TensorError::ShapeMismatch(format!(
            "dense: bias shape {:?} does not match {k_out} outputs",
            bias.shape()
        )));
    }

    let mut out = vec![0.0; batch * k_out];
    {
        let x = input.data();
        let w = weight.data();
        let bvals = bias.data();
        for b in 0..batch {
            let row = &mut out[b * k_out..][..k_out];
            row.copy_from_slice(&bvals);
            for d in 0..d_in {
                let xv = x[b * d_in + d];
                let wrow = &w[d * k_out..][..k_out];
                for (o, wv) in row.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        }
    }

    let (pin, pw, pb) = (input.clone(), weight.clone(), bias.clone());
    Ok(Tensor::from_op(
        vec![batch, k_out],
        out,
        vec![input.clone(), weight.clone(), bias.clone()],
        Box::new(move |g| {
            if pb.requires_grad() {
                let mut d_bias = vec![0.0; k_out];
                for b in 0..batch {
                    for (db, gv) in d_bias.iter_mut().zip(&g[b * k_out..][..k_out]) {
                        *db += gv;
                    }
                }
                pb.accumulate_grad(&d_bias);
            }
            if pw.requires_grad() {
                let x = pin.data();
                let mut d_w = vec![0.0; d_in * k_out];
                for b in 0..batch {
                    let grow = &g[b * k_out..][..k_out];
                    for d in 0..d_in {
                        let xv = x[b * d_in + d];
                        let drow = &mut d_w[d * k_out..][..k_out];
                        for (dv, gv) in drow.iter_mut().zip(grow) {
                            *dv += xv * gv;
                        }
                    }
                }
                pw.accumulate_grad(&d_w);
            }
            if pin.requires_grad() {
                let w = pw.data();
                let mut d_in_buf = vec![0.0; batch * d_in];
                for b in 0..batch {
                    let grow = &g[b * k_out..][..k_out];
                    for d in 0..d_in {
                        let wrow = &w[d * k_out..][..k_out];
                        let mut acc = 0.0;
                        for (wv, gv) in wrow.iter().zip(grow) {
                            acc += wv * gv;
                        }
                        d_in_buf[b * d_in + d] = acc;
                    }
                }
                pin.accumulate_grad(&d_in_buf);
            }
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_zero_bias_is_identity() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let weight = Tensor::from_vec(&[3, 3], w).unwrap();
        let bias = Tensor::zeros(&[3]);
        let y = dense(&x, &weight, &bias).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn hand_computed_affine() {
        // [1,2] x [[1,3],[2,4]] + [10,20] = [1*1+2*2+10, 1*3+2*4+20]
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![10.0, 20.0]).unwrap();
        let y = dense(&x, &w, &b).unwrap();
        assert_eq!(y.to_vec(), vec![15.0, 31.0]);
    }

    #[test]
    fn inner_dim_mismatch_rejected() {
        let x = Tensor::zeros(&[1, 3]);
        let w = Tensor::zeros(&[4, 2]);
        let b = Tensor::zeros(&[2]);
        assert!(matches!(dense(&x, &w, &b), Err(TensorError::ShapeMismatch(_))));
    }
}
