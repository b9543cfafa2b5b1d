//! Matrix entropy estimators and layer-wise entropy transitions.
//!
//! A matrix `Z ∈ R^{α×β}` is treated as `αβ` samples of one scalar random
//! variable. Two estimators are provided: the Gaussian maximum-entropy bound
//! `½ ln(2πe σ²)` and the discrete (histogram) entropy, which can never exceed
//! `ln(αβ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::LN_2PI_E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMethod {
    GaussianUpperBound,
    DiscreteHistogram,
    GraphEntropy,
}

/// An entropy value in nats with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub method: EntropyMethod,
    /// Occupied bins (histogram) or node count (graph entropy).
    pub support_size: Option<usize>,
    /// Number of histogram bins used.
    pub bins: Option<usize>,
    /// The cap that applies to `value`.
    pub bound: f64,
}

/// A real matrix loaded for entropy analysis, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub label: String,
}

impl MatrixSample {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("matrix shape {rows}x{cols} has no entries")));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix of shape {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("entry {i} is not finite")));
        }
        Ok(MatrixSample {
            rows,
            cols,
            values,
            label: label.into(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        MatrixSample::new(
            self.rows,
            self.cols,
            self.values.iter().map(|v| v * c).collect(),
            self.label.clone(),
        )
    }
}

/// Population mean and variance.
pub(crate) fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// `½ ln(2πe σ²)` with `σ²` the population variance of the entries.
pub fn gaussian_bound_entropy(mat: &MatrixSample) -> Result<EntropyEstimate> {
    if mat.len() < 2 {
        return Err(Error::DegenerateMatrix(format!(
            "'{}' has a single entry",
            mat.label
        )));
    }
    let (_, var) = mean_variance(mat.values());
    if var <= 0.0 {
        return Err(Error::DegenerateMatrix(format!("'{}' has zero variance", mat.label)));
    }
    let value = 0.5 * (LN_2PI_E + var.ln());
    Ok(EntropyEstimate {
        value,
        method: EntropyMethod::GaussianUpperBound,
        support_size: None,
        bins: None,
        bound: value,
    })
}

/// How histogram bins are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Freedman–Diaconis width, at least 16 bins and at most one bin per entry.
    Auto,
    Count(usize),
    Width(f64),
}

pub const MIN_AUTO_BINS: usize = 16;

impl Binning {
    fn bin_count(&self, sorted: &[f64]) -> Result<usize> {
        let n = sorted.len();
        let range = sorted[n - 1] - sorted[0];
        let count = match *self {
            Binning::Count(0) => return Err(Error::invalid("bin count must be at least 1")),
            Binning::Count(k) => k,
            Binning::Width(h) if !(h.is_finite() && h > 0.0) => {
                return Err(Error::invalid(format!("bin width {h} must be positive")))
            }
            Binning::Width(h) => ((range / h).ceil() as usize).max(1),
            Binning::Auto => {
                let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
                let h = 2.0 * iqr / (n as f64).cbrt();
                let fd = if h > 0.0 && range > 0.0 {
                    (range / h).ceil() as usize
                } else {
                    0
                };
                fd.max(MIN_AUTO_BINS).min(n)
            }
        };
        Ok(count)
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Discrete entropy `-Σ p_i ln p_i` over occupied histogram bins,
/// `p_i = count_i / (αβ)`.
pub fn histogram_entropy(mat: &MatrixSample, binning: Binning) -> Result<EntropyEstimate> {
    let total = mat.len();
    let mut sorted = mat.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let bins = binning.bin_count(&sorted)?;
    let lo = sorted[0];
    let range = sorted[total - 1] - lo;

    let mut counts = vec![0usize; bins];
    if range > 0.0 {
        let width = range / bins as f64;
        for &v in &sorted {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    } else {
        counts[0] = total;
    }

    let n = total as f64;
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    // ln N - Σ c ln c / N is exact for equal counts
    let weighted: f64 = counts
        .iter()
        .filter(|&&c| c > 1)
        .map(|&c| c as f64 * (c as f64).ln())
        .sum();
    let bound = n.ln();
    let value = (n.ln() - weighted / n).clamp(0.0, (occupied as f64).ln());
    Ok(EntropyEstimate {
        value,
        method: EntropyMethod::DiscreteHistogram,
        support_size: Some(occupied),
        bins: Some(bins),
        bound,
    })
}

/// One row of an entropy transition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntropy {
    pub index: usize,
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    /// `None` when the matrix has zero variance.
    pub gaussian: Option<f64>,
    pub histogram: f64,
    pub bins: usize,
    /// Change from the previous layer; zero for the first layer.
    pub delta_gaussian: Option<f64>,
    pub delta_histogram: f64,
    /// Histogram entropy fell below `collapse_fraction` of the first layer's.
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTransition {
    pub collapse_fraction: f64,
    pub layers: Vec<LayerEntropy>,
    /// First layer flagged as collapsed, if any.
    pub first_collapse: Option<usize>,
}

pub const DEFAULT_COLLAPSE_FRACTION: f64 = 0.05;

/// Per-layer entropies (both estimators), deltas and collapse flags.
pub fn entropy_transition(
    mats: &[MatrixSample],
    binning: Binning,
    collapse_fraction: f64,
) -> Result<EntropyTransition> {
    if mats.len() < 2 {
        return Err(Error::invalid("entropy transition needs at least two matrices"));
    }
    if !(0.0..=1.0).contains(&collapse_fraction) {
        return Err(Error::invalid(format!(
            "collapse fraction {collapse_fraction} must lie in [0, 1]"
        )));
    }
    let mut layers: Vec<LayerEntropy> = Vec::with_capacity(mats.len());
    for (index, mat) in mats.iter().enumerate() {
        let gaussian = match gaussian_bound_entropy(mat) {
            Ok(e) => Some(e.value),
            Err(Error::DegenerateMatrix(_)) => None,
            Err(e) => return Err(e),
        };
        let hist = histogram_entropy(mat, binning)?;
        let (delta_gaussian, delta_histogram) = match layers.last() {
            None => (Some(0.0), 0.0),
            Some(prev) => (
                gaussian.zip(prev.gaussian).map(|(g, p)| g - p),
                hist.value - prev.histogram,
            ),
        };
        let collapsed = match layers.first() {
            Some(first) => hist.value < collapse_fraction * first.histogram,
            None => false,
        };
        let (rows, cols) = mat.shape();
        layers.push(LayerEntropy {
            index,
            label: mat.label.clone(),
            rows,
            cols,
            gaussian,
            histogram: hist.value,
            bins: hist.bins.unwrap_or(0),
            delta_gaussian,
            delta_histogram,
            collapsed,
        });
    }
    let first_collapse = layers.iter().find(|l| l.collapsed).map(|l| l.index);
    Ok(EntropyTransition {
        collapse_fraction,
        layers,
        first_collapse,
    })
}
