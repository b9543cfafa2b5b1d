//! Monte-Carlo check of the layer variance recursion on linear passes
//! `H_l = S_l H_{l-1} W_l` with i.i.d. Gaussian features and weights.
//!
//! Two predictions are reported per layer. The approximate one is the
//! recursion `σ²_{H_l} = n w_{l-1} (σ²_w + μ²_w) σ²_{S_l} σ²_{H_{l-1}}`. The exact
//! one is the pooled entry variance implied by the actual operators:
//! `σ²_{H_0} · ‖S_l⋯S_1‖²_F / n · tr E[V_lᵀV_l] / w_l` with `V_l = W_1⋯W_l`.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::WeightMoments;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix_io;
use crate::propagation::{self, population_variance, LayerVariances, PropagationSpec};
use crate::sparse::CsrMatrix;

fn default_input_variance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// `w_0..w_L`.
    pub widths: Vec<usize>,
    /// One pair per layer; empty means `(0, 1)` everywhere.
    #[serde(default)]
    pub weight_moments: Vec<WeightMoments>,
    #[serde(default = "default_input_variance")]
    pub input_variance: f64,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64, widths: Vec<usize>) -> Self {
        McConfig {
            samples,
            seed,
            widths,
            weight_moments: Vec::new(),
            input_variance: 1.0,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    pub fn moments(&self, layer: usize) -> WeightMoments {
        self.weight_moments.get(layer - 1).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::invalid("at least one Monte-Carlo sample is required"));
        }
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::invalid("widths must list w_0..w_L with L >= 1 and positive entries"));
        }
        if !self.weight_moments.is_empty() && self.weight_moments.len() != self.depth() {
            return Err(Error::invalid(format!(
                "{} weight-moment pairs given for {} layers",
                self.weight_moments.len(),
                self.depth()
            )));
        }
        for m in &self.weight_moments {
            if !(m.mean.is_finite() && m.variance.is_finite() && m.variance >= 0.0) || m.second_moment() <= 0.0 {
                return Err(Error::invalid("weight moments need variance >= 0 and σ² + μ² > 0"));
            }
        }
        if !(self.input_variance.is_finite() && self.input_variance > 0.0) {
            return Err(Error::invalid("input variance must be positive"));
        }
        Ok(())
    }
}

/// Predicted entry variance of `H_0..H_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub approximate: Vec<f64>,
    pub exact: Vec<f64>,
}

/// `‖S_l⋯S_1‖²_F` for `l = 1..L`, accumulated column by column.
fn product_frobenius(ops: &[CsrMatrix]) -> Vec<f64> {
    let n = ops[0].cols();
    let depth = ops.len();
    let per_column: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut v = vec![0.0; n];
            v[j] = 1.0;
            let mut norms = Vec::with_capacity(depth);
            for s in ops {
                v = s.mul_dense(&v, 1);
                norms.push(v.iter().map(|x| x * x).sum::<f64>());
            }
            norms
        })
        .collect();
    (0..depth).map(|l| per_column.iter().map(|c| c[l]).sum()).collect()
}

pub fn predict_with_operators(ops: &[CsrMatrix], cfg: &McConfig) -> Result<Prediction> {
    cfg.validate()?;
    check_operators(ops, cfg)?;
    let n = ops[0].rows();
    let vars = LayerVariances::new(n, ops.iter().map(population_variance).collect())?;
    let w: Vec<f64> = cfg.widths.iter().map(|&w| w as f64).collect();

    let mut approximate = vec![cfg.input_variance];
    for (l, s2) in vars.sigma2().iter().enumerate() {
        let prev = approximate[l];
        approximate.push(n as f64 * w[l] * cfg.moments(l + 1).second_moment() * s2 * prev);
    }

    let frob = product_frobenius(ops);
    let mut exact = vec![cfg.input_variance];
    let (mut tr_q, mut sum_q) = (w[0], w[0]);
    for l in 1..=ops.len() {
        let m = cfg.moments(l);
        let mu2 = m.mean * m.mean;
        let next_tr = w[l] * m.variance * tr_q + w[l] * mu2 * sum_q;
        let next_sum = w[l] * m.variance * tr_q + w[l] * w[l] * mu2 * sum_q;
        tr_q = next_tr;
        sum_q = next_sum;
        exact.push(cfg.input_variance * frob[l - 1] / n as f64 * tr_q / w[l]);
    }
    Ok(Prediction { approximate, exact })
}

pub fn predict_variances(g: &Graph, spec: &PropagationSpec, cfg: &McConfig) -> Result<Prediction> {
    cfg.validate()?;
    let ops = propagation::layer_operators(g, spec, cfg.depth())?;
    predict_with_operators(&ops, cfg)
}

fn check_operators(ops: &[CsrMatrix], cfg: &McConfig) -> Result<()> {
    if ops.len() != cfg.depth() {
        return Err(Error::invalid(format!(
            "{} operators given for {} layers",
            ops.len(),
            cfg.depth()
        )));
    }
    let n = ops[0].rows();
    if ops.iter().any(|s| s.rows() != n || s.cols() != n) {
        return Err(Error::invalid("operators must all be n×n"));
    }
    Ok(())
}

/// Per-trial RNG: one ChaCha stream per trial index under the run seed.
fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn normal(mean: f64, variance: f64) -> Normal<f64> {
    Normal::new(mean, variance.sqrt()).expect("validated moments")
}

/// One forward pass; returns `H_0..H_L` row-major, or `None` on overflow.
fn forward(ops: &[CsrMatrix], cfg: &McConfig, trial: usize) -> Option<Vec<Vec<f64>>> {
    let n = ops[0].rows();
    let mut rng = trial_rng(cfg.seed, trial);
    let h0_dist = normal(0.0, cfg.input_variance);
    let h0: Vec<f64> = (0..n * cfg.widths[0]).map(|_| h0_dist.sample(&mut rng)).collect();
    let mut layers = vec![h0];
    for (l, s) in ops.iter().enumerate() {
        let (win, wout) = (cfg.widths[l], cfg.widths[l + 1]);
        let m = cfg.moments(l + 1);
        let dist = normal(m.mean, m.variance);
        let weights: Vec<f64> = (0..win * wout).map(|_| dist.sample(&mut rng)).collect();
        let prev = &layers[l];
        let mut hw = vec![0.0; n * wout];
        for i in 0..n {
            let row = &prev[i * win..(i + 1) * win];
            let out = &mut hw[i * wout..(i + 1) * wout];
            for (k, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    let wrow = &weights[k * wout..(k + 1) * wout];
                    for (o, &wv) in out.iter_mut().zip(wrow) {
                        *o += x * wv;
                    }
                }
            }
        }
        let h = s.mul_dense(&hw, wout);
        if h.iter().any(|v| !v.is_finite()) {
            return None;
        }
        layers.push(h);
    }
    Some(layers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McLayer {
    pub layer: usize,
    pub rows: usize,
    pub cols: usize,
    pub predicted: f64,
    pub predicted_exact: f64,
    pub empirical: f64,
    pub empirical_mean: f64,
    /// Standard error of the pooled mean, from per-trial means; absent with one trial.
    pub mean_standard_error: Option<f64>,
    /// Standard error of the pooled variance, from per-trial second moments.
    pub standard_error: Option<f64>,
    pub relative_error: f64,
    pub relative_error_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub samples: usize,
    pub seed: u64,
    pub completed_trials: usize,
    pub aborted_trials: Vec<usize>,
    pub layers: Vec<McLayer>,
}

fn standard_error(values: &[f64]) -> Option<f64> {
    let t = values.len();
    if t < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / t as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
    Some((var / t as f64).sqrt())
}

pub fn simulate_with_operators(ops: &[CsrMatrix], cfg: &McConfig) -> Result<McReport> {
    let prediction = predict_with_operators(ops, cfg)?;
    let n = ops[0].rows();
    let depth = cfg.depth();

    // per trial and layer: (mean, second moment) over the n × w_l entries
    let trials: Vec<Option<Vec<(f64, f64)>>> = (0..cfg.samples)
        .into_par_iter()
        .map(|t| {
            forward(ops, cfg, t).map(|layers| {
                layers
                    .iter()
                    .map(|h| {
                        let count = h.len() as f64;
                        let sum: f64 = h.iter().sum();
                        let sq: f64 = h.iter().map(|v| v * v).sum();
                        (sum / count, sq / count)
                    })
                    .collect()
            })
        })
        .collect();

    let aborted: Vec<usize> = trials
        .iter()
        .enumerate()
        .filter_map(|(t, r)| r.is_none().then_some(t))
        .collect();
    let done: Vec<&Vec<(f64, f64)>> = trials.iter().flatten().collect();
    let completed = done.len();

    let layers = (0..=depth)
        .map(|l| {
            let means: Vec<f64> = done.iter().map(|t| t[l].0).collect();
            let seconds: Vec<f64> = done.iter().map(|t| t[l].1).collect();
            let (mean, second) = if completed == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (
                    means.iter().sum::<f64>() / completed as f64,
                    seconds.iter().sum::<f64>() / completed as f64,
                )
            };
            let empirical = second - mean * mean;
            let predicted = prediction.approximate[l];
            let predicted_exact = prediction.exact[l];
            McLayer {
                layer: l,
                rows: n,
                cols: cfg.widths[l],
                predicted,
                predicted_exact,
                empirical,
                empirical_mean: mean,
                mean_standard_error: standard_error(&means),
                standard_error: standard_error(&seconds),
                relative_error: (empirical - predicted).abs() / predicted,
                relative_error_exact: (empirical - predicted_exact).abs() / predicted_exact,
            }
        })
        .collect();

    Ok(McReport {
        samples: cfg.samples,
        seed: cfg.seed,
        completed_trials: completed,
        aborted_trials: aborted,
        layers,
    })
}

pub fn simulate(g: &Graph, spec: &PropagationSpec, cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let ops = propagation::layer_operators(g, spec, cfg.depth())?;
    simulate_with_operators(&ops, cfg)
}

/// Writes `layer0.bin..layerL.bin` from trial 0 into `dir`.
pub fn dump_layers_with_operators(ops: &[CsrMatrix], cfg: &McConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    check_operators(ops, cfg)?;
    let layers = forward(ops, cfg, 0)
        .ok_or_else(|| Error::Overflow("forward pass overflowed in trial 0".into()))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = ops[0].rows();
    layers
        .iter()
        .enumerate()
        .map(|(l, h)| {
            let path = dir.join(format!("layer{l}.bin"));
            matrix_io::write_binary(&path, n, cfg.widths[l], h)?;
            Ok(path)
        })
        .collect()
}

pub fn dump_layers(g: &Graph, spec: &PropagationSpec, cfg: &McConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ops = propagation::layer_operators(g, spec, cfg.depth())?;
    dump_layers_with_operators(&ops, cfg, dir)
}
