//! Batch normalization over `[B,C,H,W]` with per-channel statistics.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Whether an operation runs with training or inference semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Exponential-moving-average statistics a batch-norm layer carries between
/// steps. The first training batch seeds the averages directly.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub initialized: bool,
    pub momentum: f64,
    pub eps: f64,
}

impl RunningStats {
    pub fn new(channels: usize) -> RunningStats {
        RunningStats {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            initialized: false,
            momentum: 0.9,
            eps: 1e-5,
        }
    }

    pub fn with_hyper(channels: usize, momentum: f64, eps: f64) -> RunningStats {
        RunningStats { momentum, eps, ..RunningStats::new(channels) }
    }
}

/// Normalizes each channel, scales by `gamma` and shifts by `beta`.
///
/// Train mode normalizes by the batch statistics (biased variance), updates
/// the running averages, and differentiates through the statistics. Infer
/// mode uses the stored running statistics as constants.
pub fn batch_norm(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    stats: &mut RunningStats,
    mode: Mode,
) -> Result<Tensor> {
    let (batch, channels, height, width) = input.dims4()?;
    if gamma.shape() != [channels] || beta.shape() != [channels] {
        return Err(TensorError::ShapeMismatch(format!(
            "batch_norm: gamma {:?} / beta {:?} must both be [{channels}]",
            gamma.shape(),
            beta.shape()
        )));
    }
    if stats.mean.len() != channels {
        return Err(TensorError::ShapeMismatch(format!(
            "batch_norm: running stats track {} channels, input has {channels}",
            stats.mean.len()
        )));
    }
    let per_channel = batch * height * width;

    let (mean, var) = match mode {
        Mode::Train => {
            if per_channel < 2 {
                return Err(TensorError::BatchTooSmall { per_channel });
            }
            let x = input.data();
            let mut mean = vec![0.0; channels];
            let mut var = vec![0.0; channels];
            let plane = height * width;
            for c in 0..channels {
                let mut acc = 0.0;
                for b in 0..batch {
                    acc += x[(b * channels + c) * plane..][..plane].iter().sum::<f64>();
                }
                mean[c] = acc / per_channel as f64;
                let mut sq = 0.0;
                for b in 0..batch {
                    for v in &x[(b * channels + c) * plane..][..plane] {
                        let d = v - mean[c];
                        sq += d * d;
                    }
                }
                var[c] = sq / per_channel as f64;
            }
            if stats.initialized {
                let m = stats.momentum;
                for c in 0..channels {
                    stats.mean[c] = m * stats.mean[c] + (1.0 - m) * mean[c];
                    stats.var[c] = m * stats.var[c] + (1.0 - m) * var[c];
                }
            } else {
                stats.mean.copy_from_slice(&mean);
                stats.var.copy_from_slice(&var);
                stats.initialized = true;
            }
            (mean, var)
        }
        Mode::Infer => {
            if !stats.initialized {
                return Err(TensorError::UninitializedRunningStats);
            }
            (stats.mean.clone(), stats.var.clone())
        }
    };

    let eps = stats.eps;
    let plane = height * width;
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut out = vec![0.0; input.numel()];
    let mut normalized = vec![0.0; input.numel()];
    {
        let x = input.data();
        let gv = gamma.data();
        let bv = beta.data();
        for b in 0..batch {
            for c in 0..channels {
                let base = (b * channels + c) * plane;
                for i in 0..plane {
                    let xhat = (x[base + i] - mean[c]) * inv_std[c];
                    normalized[base + i] = xhat;
                    out[base + i] = gv[c] * xhat + bv[c];
                }
            }
        }
    }

    let (pin, pg, pb) = (input.clone(), gamma.clone(), beta.clone());
    Ok(Tensor::from_op(
        input.shape().to_vec(),
        out,
        vec![input.clone(), gamma.clone(), beta.clone()],
        Box::new(move |g| {
            let n = per_channel as f64;
            // Per-channel reductions of the upstream gradient.
            let mut sum_g = vec![0.0; channels];
            let mut sum_g_xhat = vec![0.0; channels];
            for b in 0..batch {
                for c in 0..channels {
                    let base = (b * channels + c) * plane;
                    for i in 0..plane {
                        sum_g[c] += g[base + i];
                        sum_g_xhat[c] += g[base + i] * normalized[base + i];
                    }
                }
            }
            if pb.requires_grad() {
                pb.accumulate_grad(&sum_g);
            }
            if pg.requires_grad() {
                pg.accumulate_grad(&sum_g_xhat);
            }
            if pin.requires_grad() {
                let gv = pg.data();
                let mut d_in = vec![0.0; batch * channels * plane];
                match mode {
                    Mode::Train => {
                        // dx = gamma/std * (g - mean(g) - xhat * mean(g*xhat))
                        for b in 0..batch {
                            for c in 0..channels {
                                let base = (b * channels + c) * plane;
                                let scale = gv[c] * inv_std[c];
                                let mg = sum_g[c] / n;
                                let mgx = sum_g_xhat[c] / n;
                                for i in 0..plane {
                                    d_in[base + i] = scale
                                        * (g[base + i] - mg - normalized[base + i] * mgx);
                                }
                            }
                        }
                    }
                    Mode::Infer => {
                        // Statistics are constants here.
                        for b in 0..batch {
                            for c in 0..channels {
                                let base = (b * channels + c) * plane;
                                let scale = gv[c] * inv_std[c];
                                for i in 0..plane {
                                    d_in[base + i] = scale * g[base + i];
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
