//! Central finite-difference gradient checking.
//!
//! Used by the test suites to validate every differentiable operation:
//! the analytic gradient from [`crate::backward`] is compared against
//! `(f(x + h) - f(x - h)) / 2h` on sampled parameter elements.

use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    /// Elements sampled per parameter tensor (all of them when the tensor
    /// is smaller).
    pub samples_per_param: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { samples_per_param: 50, step: 1e-5, tolerance: 1e-4, seed: 0x9e3779b9 }
    }
}

#[derive(Debug)]
pub struct CheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// (param index, element index, analytic, numeric) for elements over
    /// tolerance.
    pub failures: Vec<(usize, usize, f64, f64)>,
}

impl CheckReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

// SplitMix64; enough for sampling element indices without pulling in a
// dependency.
struct Mix(u64);

impl Mix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

/// Central difference of `loss_fn` w.r.t. element `index` of `param`.
///
/// `loss_fn` must be a pure function of the current parameter values; it is
/// invoked twice and the parameter is restored afterwards.
pub fn numerical_grad(
    param: &Tensor,
    index: usize,
    step: f64,
    loss_fn: &mut dyn FnMut() -> Result<Tensor>,
) -> Result<f64> {
    let original = param.data()[index];
    param.update_data(|d| d[index] = original + step)?;
    let plus = loss_fn()?.item()?;
    param.update_data(|d| d[index] = original - step)?;
    let minus = loss_fn()?.item()?;
    param.update_data(|d| d[index] = original)?;
    Ok((plus - minus) / (2.0 * step))
}

/// Runs one analytic backward pass of `loss_fn` and compares sampled
/// elements of every parameter's gradient against central differences.
pub fn check_gradients(
    params: &[&Tensor],
    mut loss_fn: impl FnMut() -> Result<Tensor>,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    for p in params {
        p.clear_grad();
    }
    let loss = loss_fn()?;
    crate::backward(&loss)?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut rng = Mix(cfg.seed);
    let mut report = CheckReport { checked: 0, max_rel_err: 0.0, failures: Vec::new() };
    for (pi, p) in params.iter().enumerate() {
        let n = p.numel();
        let indices: Vec<usize> = if n <= cfg.samples_per_param {
            (0..n).collect()
        } else {
            (0..cfg.samples_per_param).map(|_| rng.below(n)).collect()
        };
        for idx in indices {
            let numeric = numerical_grad(p, idx, cfg.step, &mut loss_fn)?;
            let rel = relative_error(analytic[pi][idx], numeric);
            report.checked += 1;
            report.max_rel_err = report.max_rel_err.max(rel);
            if rel >= cfg.tolerance {
                report.failures.push((pi, idx, analytic[pi][idx], numeric));
            }
        }
    }
    Ok(report)
}
