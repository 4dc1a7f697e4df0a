//! Full reductions to a scalar.

use crate::error::Result;
use crate::tensor::Tensor;

pub fn sum(x: &Tensor) -> Result<Tensor> {
    let total: f64 = x.data().iter().sum();
    let px = x.clone();
    let n = x.numel();
    Ok(Tensor::from_op(
        vec![1],
        vec![total],
        vec![x.clone()],
        Box::new(move |g| {
            px.accumulate_grad(&vec![g[0]; n]);
        }),
    ))
}

pub fn mean(x: &Tensor) -> Result<Tensor> {
    let n = x.numel();
    let total: f64 = x.data().iter().sum();
    let px = x.clone();
    Ok(Tensor::from_op(
        vec![1],
        vec![total / n as f64],
        vec![x.clone()],
        Box::new(move |g| {
            px.accumulate_grad(&vec![g[0] / n as f64; n]);
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_and_mean_values() {
        let x = Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(sum(&x).unwrap().item().unwrap(), 10.0);
        assert_eq!(mean(&x).unwrap().item().unwrap(), 2.5);
    }

    #[test]
    fn mean_backward_divides_by_count() {
        let x = Tensor::param(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let loss = mean(&x).unwrap();
        crate::backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.25; 4]);
    }
}
