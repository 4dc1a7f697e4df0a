//! Elementwise arithmetic and activations. All are rank-agnostic and require
//! operands of identical shape.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch(format!(
            "{op}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("add", a, b)?;
    let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x + y).collect();
    let (pa, pb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |g| {
            pa.accumulate_grad(g);
            pb.accumulate_grad(g);
        }),
    ))
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("mul", a, b)?;
    let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x * y).collect();
    let (pa, pb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |g| {
            if pa.requires_grad() {
                let vb = pb.data();
                let d: Vec<f64> = g.iter().zip(vb.iter()).map(|(gi, y)| gi * y).collect();
                pa.accumulate_grad(&d);
            }
            if pb.requires_grad() {
                let va = pa.data();
                let d: Vec<f64> = g.iter().zip(va.iter()).map(|(gi, x)| gi * x).collect();
                pb.accumulate_grad(&d);
            }
        }),
    ))
}

/// `scale * x + shift`, elementwise. Covers negation (`-1, 0`),
/// complement (`-1, 1`) and plain scaling.
pub fn affine(x: &Tensor, scale: f64, shift: f64) -> Result<Tensor> {
    let data: Vec<f64> = x.data().iter().map(|v| scale * v + shift).collect();
    let px = x.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            let d: Vec<f64> = g.iter().map(|gi| gi * scale).collect();
            px.accumulate_grad(&d);
        }),
    ))
}

/// Natural logarithm. Inputs must be strictly positive; clamp first when the
/// operand can reach zero.
pub fn ln(x: &Tensor) -> Result<Tensor> {
    if let Some(v) = x.data().iter().find(|v| **v <= 0.0) {
        return Err(TensorError::Invalid(format!("ln of non-positive value {v}")));
    }
    let data: Vec<f64> = x.data().iter().map(|v| v.ln()).collect();
    let px = x.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            let vx = px.data();
            let d: Vec<f64> = g.iter().zip(vx.iter()).map(|(gi, v)| gi / v).collect();
            px.accumulate_grad(&d);
        }),
    ))
}

/// Clamps values into `[lo, hi]`; the gradient passes through inside the
/// interval and is zero outside.
pub fn clamp(x: &Tensor, lo: f64, hi: f64) -> Result<Tensor> {
    if !(lo < hi) {
        return Err(TensorError::Invalid(format!("clamp: empty interval [{lo}, {hi}]")));
    }
    let data: Vec<f64> = x.data().iter().map(|v| v.clamp(lo, hi)).collect();
    let px = x.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            let vx = px.data();
            let d: Vec<f64> = g
                .iter()
                .zip(vx.iter())
                .map(|(gi, v)| if *v >= lo && *v <= hi { *gi } else { 0.0 })
                .collect();
            px.accumulate_grad(&d);
        }),
    ))
}

pub fn relu(x: &Tensor) -> Result<Tensor> {
    let data: Vec<f64> = x.data().iter().map(|v| v.max(0.0)).collect();
    let px = x.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            let vx = px.data();
            let d: Vec<f64> = g
                .iter()
                .zip(vx.iter())
                .map(|(gi, v)| if *v > 0.0 { *gi } else { 0.0 })
                .collect();
            px.accumulate_grad(&d);
        }),
    ))
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    let data: Vec<f64> = x.data().iter().map(|v| sigmoid_scalar(*v)).collect();
    let px = x.clone();
    let out = data.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            let d: Vec<f64> = g
                .iter()
                .zip(out.iter())
                .map(|(gi, y)| gi * y * (1.0 - y))
                .collect();
            px.accumulate_grad(&d);
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_of_zero_is_half() {
        let y = sigmoid(&Tensor::scalar(0.0)).unwrap();
        assert_eq!(y.item().unwrap(), 0.5);
    }

    #[test]
    fn sigmoid_is_stable_for_large_magnitudes() {
        let y = sigmoid(&Tensor::from_vec(&[2], vec![-800.0, 800.0]).unwrap()).unwrap();
        let v = y.to_vec();
        assert!(v[0] >= 0.0 && v[0] < 1e-300);
        assert_eq!(v[1], 1.0);
    }

    #[test]
    fn relu_clips_negatives() {
        let y = relu(&Tensor::from_vec(&[2], vec![-1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.to_vec(), vec![0.0, 2.0]);
    }

    #[test]
    fn add_rejects_shape_mismatch() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[3, 2]);
        assert!(matches!(add(&a, &b), Err(TensorError::ShapeMismatch(_))));
    }

    #[test]
    fn affine_complement() {
        let x = Tensor::from_vec(&[3], vec![0.1, 0.5, 0.9]).unwrap();
        let y = affine(&x, -1.0, 1.0).unwrap();
        assert_eq!(y.to_vec(), vec![0.9, 0.5, 0.09999999999999998]);
    }

    #[test]
    fn ln_rejects_non_positive() {
        let x = Tensor::from_vec(&[2], vec![1.0, 0.0]).unwrap();
        assert!(ln(&x).is_err());
    }

    #[test]
    fn clamp_gates_gradient() {
        let x = Tensor::param(&[3], vec![-1.0, 0.5, 2.0]).unwrap();
        let y = clamp(&x, 0.0, 1.0).unwrap();
        assert_eq!(y.to_vec(), vec![0.0, 0.5, 1.0]);
        let loss = crate::ops::sum(&y).unwrap();
        crate::backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0, 0.0]);
    }
}
