//! Spectral propagation operators `S_l` and their entry population variance.
//!
//! Every family is a polynomial in a normalized adjacency matrix. GCN-style
//! families use `Â = D̂^{-1/2}(A+I)D̂^{-1/2}`; personalized PageRank uses the
//! row-stochastic `T = D̂^{-1}(A+I)` so that its kernel rows sum to one. Missing
//! self-loops are added with weight 1; existing ones are not doubled.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::CsrMatrix;
use crate::VARIANCE_FLOOR;

/// Threshold applied to dense diffusion kernels unless configured otherwise.
pub const DEFAULT_DIFFUSION_EPS: f64 = 1e-4;
pub const DEFAULT_PPR_ORDER: usize = 50;
pub const DEFAULT_HEAT_ORDER: usize = 30;

fn default_ppr_order() -> usize {
    DEFAULT_PPR_ORDER
}

fn default_heat_order() -> usize {
    DEFAULT_HEAT_ORDER
}

/// One propagation operator family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Operator {
    GcnSymNorm,
    SgcPower {
        k: usize,
    },
    PprDiffusion {
        alpha: f64,
        #[serde(default = "default_ppr_order")]
        order: usize,
    },
    HeatKernelDiffusion {
        t: f64,
        #[serde(default = "default_heat_order")]
        order: usize,
    },
    S2gcAverage {
        k: usize,
    },
    CustomPolynomial {
        coefficients: Vec<f64>,
    },
}

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::GcnSymNorm => "gcn-sym-norm",
            Operator::SgcPower { .. } => "sgc-power",
            Operator::PprDiffusion { .. } => "ppr-diffusion",
            Operator::HeatKernelDiffusion { .. } => "heat-kernel-diffusion",
            Operator::S2gcAverage { .. } => "s2gc-average",
            Operator::CustomPolynomial { .. } => "custom-polynomial",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Operator::GcnSymNorm => Ok(()),
            Operator::SgcPower { k } | Operator::S2gcAverage { k } if k == 0 => {
                Err(Error::invalid(format!("{}: power k must be at least 1", self.name())))
            }
            Operator::SgcPower { .. } | Operator::S2gcAverage { .. } => Ok(()),
            Operator::PprDiffusion { alpha, order } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::invalid(format!("teleport alpha={alpha} must lie in (0, 1)")));
                }
                if order == 0 {
                    return Err(Error::invalid("ppr truncation order must be at least 1"));
                }
                Ok(())
            }
            Operator::HeatKernelDiffusion { t, order } => {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::invalid(format!("diffusion time t={t} must be positive")));
                }
                if order == 0 {
                    return Err(Error::invalid("heat kernel truncation order must be at least 1"));
                }
                Ok(())
            }
            Operator::CustomPolynomial { ref coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("polynomial coefficients must be finite and non-empty"));
                }
                if coefficients.iter().all(|&c| c == 0.0) {
                    return Err(Error::invalid("polynomial coefficients are all zero"));
                }
                Ok(())
            }
        }
    }

    fn is_dense_diffusion(&self) -> bool {
        matches!(
            self,
            Operator::PprDiffusion { .. } | Operator::HeatKernelDiffusion { .. }
        )
    }

    /// Monomial coefficients `c_k` of the operator as a polynomial in its base matrix.
    fn coefficients(&self) -> Result<Vec<f64>> {
        let coeffs = match *self {
            Operator::GcnSymNorm => vec![0.0, 1.0],
            Operator::SgcPower { k } => {
                let mut c = vec![0.0; k + 1];
                c[k] = 1.0;
                c
            }
            Operator::S2gcAverage { k } => {
                let mut c = vec![1.0 / k as f64; k + 1];
                c[0] = 0.0;
                c
            }
            Operator::CustomPolynomial { ref coefficients } => coefficients.clone(),
            Operator::PprDiffusion { alpha, order } => {
                // K-step personalized PageRank: the truncated tail mass (1-α)^K
                // stays on the last power so rows of the kernel sum to one.
                let mut c: Vec<f64> = (0..order)
                    .map(|k| alpha * (1.0 - alpha).powi(k as i32))
                    .collect();
                c.push((1.0 - alpha).powi(order as i32));
                c
            }
            Operator::HeatKernelDiffusion { t, order } => {
                let mut c = Vec::with_capacity(order + 1);
                let mut term = (-t).exp();
                if term == 0.0 {
                    return Err(Error::Overflow(format!(
                        "heat kernel weight e^-t underflows for t={t}"
                    )));
                }
                c.push(term);
                for k in 1..=order {
                    term *= t / k as f64;
                    if !term.is_finite() {
                        return Err(Error::Overflow(format!(
                            "heat kernel term {k} is not finite for t={t}"
                        )));
                    }
                    c.push(term);
                }
                c
            }
        };
        Ok(coeffs)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::GcnSymNorm => write!(f, "gcn"),
            Operator::SgcPower { k } => write!(f, "sgc:k={k}"),
            Operator::PprDiffusion { alpha, order } => write!(f, "ppr:alpha={alpha},order={order}"),
            Operator::HeatKernelDiffusion { t, order } => write!(f, "heat:t={t},order={order}"),
            Operator::S2gcAverage { k } => write!(f, "s2gc:k={k}"),
            Operator::CustomPolynomial { coefficients } => {
                let list: Vec<String> = coefficients.iter().map(f64::to_string).collect();
                write!(f, "poly:{}", list.join(","))
            }
        }
    }
}

/// Parses the shorthand used on the command line, e.g. `gcn`, `sgc:k=2`,
/// `ppr:alpha=0.1,order=50`, `heat:t=3`, `s2gc:k=4`, `poly:0,1,0.5`.
impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let kv = |key: &str| -> Result<Option<&str>> {
            for part in args.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(format!("expected key=value in '{part}'")))?;
                if k.trim() == key {
                    return Ok(Some(v.trim()));
                }
            }
            Ok(None)
        };
        let num = |key: &str| -> Result<Option<f64>> {
            kv(key)?
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad value for {key}: '{v}'")))
                })
                .transpose()
        };
        let int = |key: &str| -> Result<Option<usize>> {
            kv(key)?
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| Error::invalid(format!("bad value for {key}: '{v}'")))
                })
                .transpose()
        };
        let required = |key: &str, v: Option<usize>| {
            v.ok_or_else(|| Error::invalid(format!("operator '{name}' needs {key}=<int>")))
        };
        let op = match name {
            "gcn" | "gcn-sym-norm" => Operator::GcnSymNorm,
            "sgc" | "sgc-power" => Operator::SgcPower {
                k: required("k", int("k")?)?,
            },
            "s2gc" | "s2gc-average" => Operator::S2gcAverage {
                k: required("k", int("k")?)?,
            },
            "ppr" | "ppr-diffusion" | "appnp" => Operator::PprDiffusion {
                alpha: num("alpha")?.unwrap_or(0.1),
                order: int("order")?.unwrap_or(DEFAULT_PPR_ORDER),
            },
            "heat" | "heat-kernel-diffusion" => Operator::HeatKernelDiffusion {
                t: num("t")?.unwrap_or(3.0),
                order: int("order")?.unwrap_or(DEFAULT_HEAT_ORDER),
            },
            "poly" | "custom-polynomial" => Operator::CustomPolynomial {
                coefficients: args
                    .split(',')
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::invalid(format!("bad coefficient '{p}'")))
                    })
                    .collect::<Result<_>>()?,
            },
            other => return Err(Error::invalid(format!("unknown propagation family '{other}'"))),
        };
        op.validate()?;
        Ok(op)
    }
}

/// Post-processing of an operator before analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sparsification {
    None,
    Threshold(f64),
    TopK(usize),
}

impl Sparsification {
    fn validate(&self) -> Result<()> {
        match *self {
            Sparsification::Threshold(eps) if !(eps.is_finite() && eps >= 0.0) => {
                Err(Error::invalid(format!("sparsification threshold {eps} must be >= 0")))
            }
            Sparsification::TopK(0) => Err(Error::invalid("top-k must keep at least one entry")),
            _ => Ok(()),
        }
    }
}

/// How operators are assigned to layers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerPlan {
    /// The same operator at every layer.
    #[default]
    Same,
    /// One operator per layer; depth must not exceed the list length.
    PerLayer(Vec<Operator>),
    /// A single collapsed operator; only depth 1 is meaningful.
    Collapsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationSpec {
    #[serde(flatten)]
    pub operator: Operator,
    #[serde(default)]
    pub layers: LayerPlan,
    /// `None` selects the family default: a 1e-4 threshold for PPR and heat
    /// kernels, nothing for the rest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsification: Option<Sparsification>,
}

impl PropagationSpec {
    pub fn new(operator: Operator) -> Self {
        PropagationSpec {
            operator,
            layers: LayerPlan::Same,
            sparsification: None,
        }
    }

    pub fn gcn() -> Self {
        Self::new(Operator::GcnSymNorm)
    }

    pub fn with_sparsification(mut self, s: Sparsification) -> Self {
        self.sparsification = Some(s);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        if let LayerPlan::PerLayer(ops) = &self.layers {
            if ops.is_empty() {
                return Err(Error::invalid("per-layer operator list is empty"));
            }
            for op in ops {
                op.validate()?;
            }
        }
        if let Some(s) = &self.sparsification {
            s.validate()?;
        }
        Ok(())
    }

    /// Operator used at 1-based layer `layer`.
    pub fn operator_at(&self, layer: usize) -> Result<&Operator> {
        match &self.layers {
            LayerPlan::Same => Ok(&self.operator),
            LayerPlan::Collapsed if layer == 1 => Ok(&self.operator),
            LayerPlan::Collapsed => Err(Error::invalid(
                "collapsed operator mode only supports depth 1",
            )),
            LayerPlan::PerLayer(ops) => ops.get(layer - 1).ok_or_else(|| {
                Error::invalid(format!(
                    "per-layer spec lists {} operators but layer {layer} was requested",
                    ops.len()
                ))
            }),
        }
    }

    fn sparsification_for(&self, op: &Operator) -> Sparsification {
        match self.sparsification {
            Some(s) => s,
            None if op.is_dense_diffusion() => Sparsification::Threshold(DEFAULT_DIFFUSION_EPS),
            None => Sparsification::None,
        }
    }
}

/// `A` with a unit diagonal (existing self-loops kept at weight 1).
fn adjacency_with_self_loops(g: &Graph) -> CsrMatrix {
    let n = g.node_count();
    let mut triplets: Vec<(usize, usize, f64)> = g
        .adjacency_triplets()
        .into_iter()
        .filter(|&(u, v, _)| u != v)
        .collect();
    triplets.extend((0..n).map(|i| (i, i, 1.0)));
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// `D̂^{-1/2}(A+I)D̂^{-1/2}`.
pub fn sym_norm_adjacency(g: &Graph) -> CsrMatrix {
    let a = adjacency_with_self_loops(g);
    let d = a.row_sums();
    let triplets: Vec<(usize, usize, f64)> = a
        .iter()
        .map(|(i, j, v)| (i, j, v / (d[i] * d[j]).sqrt()))
        .collect();
    CsrMatrix::from_triplets(a.rows(), a.cols(), &triplets)
}

/// `D̂^{-1}(A+I)`, row-stochastic.
pub fn random_walk_adjacency(g: &Graph) -> CsrMatrix {
    let a = adjacency_with_self_loops(g);
    let left: Vec<f64> = a.row_sums().iter().map(|d| 1.0 / d).collect();
    let right = vec![1.0; g.node_count()];
    a.scale_rows_cols(&left, &right)
}

/// `Σ_k c_k B^k`, expanded one row at a time as `e_iᵀ Σ_k c_k B^k`.
pub fn matrix_polynomial(base: &CsrMatrix, coeffs: &[f64]) -> Result<CsrMatrix> {
    let n = base.rows();
    assert_eq!(n, base.cols(), "polynomial base must be square");

    struct Scratch {
        cur: Vec<f64>,
        next: Vec<f64>,
        acc: Vec<f64>,
        cur_idx: Vec<usize>,
        next_idx: Vec<usize>,
        acc_idx: Vec<usize>,
        in_next: Vec<bool>,
        in_acc: Vec<bool>,
    }

    let rows: Vec<Result<Vec<(usize, f64)>>> = (0..n)
        .into_par_iter()
        .map_init(
            || Scratch {
                cur: vec![0.0; n],
                next: vec![0.0; n],
                acc: vec![0.0; n],
                cur_idx: Vec::new(),
                next_idx: Vec::new(),
                acc_idx: Vec::new(),
                in_next: vec![false; n],
                in_acc: vec![false; n],
            },
            |s, i| {
                s.cur[i] = 1.0;
                s.cur_idx.push(i);
                for (k, &c) in coeffs.iter().enumerate() {
                    if k > 0 {
                        for &j in &s.cur_idx {
                            let vj = s.cur[j];
                            let (idx, vals) = base.row(j);
                            for (&col, &b) in idx.iter().zip(vals) {
                                if !s.in_next[col] {
                                    s.in_next[col] = true;
                                    s.next_idx.push(col);
                                }
                                s.next[col] += vj * b;
                            }
                            s.cur[j] = 0.0;
                        }
                        std::mem::swap(&mut s.cur, &mut s.next);
                        std::mem::swap(&mut s.cur_idx, &mut s.next_idx);
                        s.next_idx.clear();
                        for &j in &s.cur_idx {
                            s.in_next[j] = false;
                        }
                    }
                    if c != 0.0 {
                        for &j in &s.cur_idx {
                            if !s.in_acc[j] {
                                s.in_acc[j] = true;
                                s.acc_idx.push(j);
                            }
                            s.acc[j] += c * s.cur[j];
                        }
                    }
                }
                s.acc_idx.sort_unstable();
                let mut row = Vec::with_capacity(s.acc_idx.len());
                let mut overflow = false;
                for &j in &s.acc_idx {
                    let v = s.acc[j];
                    if !v.is_finite() {
                        overflow = true;
                    } else if v != 0.0 {
                        row.push((j, v));
                    }
                    s.acc[j] = 0.0;
                    s.in_acc[j] = false;
                }
                for &j in &s.cur_idx {
                    s.cur[j] = 0.0;
                }
                s.cur_idx.clear();
                s.acc_idx.clear();
                if overflow {
                    Err(Error::Overflow(format!("operator row {i} is not finite")))
                } else {
                    Ok(row)
                }
            },
        )
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CsrMatrix::from_sorted_rows(n, rows))
}

fn sparsify(s: CsrMatrix, how: Sparsification) -> Result<CsrMatrix> {
    let out = match how {
        Sparsification::None => s,
        Sparsification::Threshold(eps) => s.prune(eps),
        Sparsification::TopK(k) => s.top_k_per_row(k),
    };
    if out.nnz() == 0 {
        return Err(Error::EmptyOperator);
    }
    Ok(out)
}

/// Builds a single operator family on `g` without sparsification.
pub fn build_dense_kernel(g: &Graph, op: &Operator) -> Result<CsrMatrix> {
    op.validate()?;
    let base = match op {
        Operator::PprDiffusion { .. } => random_walk_adjacency(g),
        _ => sym_norm_adjacency(g),
    };
    if let Operator::GcnSymNorm = op {
        return Ok(base);
    }
    matrix_polynomial(&base, &op.coefficients()?)
}

/// The operator `S_layer` (1-based) after sparsification.
pub fn build_operator(g: &Graph, spec: &PropagationSpec, layer: usize) -> Result<CsrMatrix> {
    spec.validate()?;
    if layer == 0 {
        return Err(Error::invalid("layers are numbered from 1"));
    }
    let op = spec.operator_at(layer)?;
    let kernel = build_dense_kernel(g, op)?;
    sparsify(kernel, spec.sparsification_for(op))
}

/// Operators for layers `1..=depth`.
pub fn layer_operators(g: &Graph, spec: &PropagationSpec, depth: usize) -> Result<Vec<CsrMatrix>> {
    check_depth(spec, depth)?;
    match spec.layers {
        LayerPlan::Same | LayerPlan::Collapsed => {
            let s = build_operator(g, spec, 1)?;
            Ok(vec![s; depth])
        }
        LayerPlan::PerLayer(_) => (1..=depth)
            .into_par_iter()
            .map(|l| build_operator(g, spec, l))
            .collect(),
    }
}

fn check_depth(spec: &PropagationSpec, depth: usize) -> Result<()> {
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    spec.operator_at(depth).map(|_| ())
}

/// Variance over all `n²` entries of a square matrix, zeros included,
/// computed from the stored nonzeros. Values below 1e-300 are reported as 0.
pub fn population_variance(s: &CsrMatrix) -> f64 {
    assert_eq!(s.rows(), s.cols(), "population variance needs a square matrix");
    assert!(s.rows() >= 1);
    let count = (s.rows() as f64) * (s.rows() as f64);
    let mean = s.sum() / count;
    let var = s.frobenius_sq() / count - mean * mean;
    if var <= VARIANCE_FLOOR {
        0.0
    } else {
        var
    }
}

/// Per-layer operator variances `σ²_{S_l}` for one graph and depth.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerVariances {
    n: usize,
    sigma2: Vec<f64>,
}

impl LayerVariances {
    /// Fails with a degenerate-operator error if any variance is zero.
    pub fn new(n: usize, sigma2: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("node count must be positive"));
        }
        if sigma2.is_empty() {
            return Err(Error::invalid("at least one layer is required"));
        }
        for (i, &v) in sigma2.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("layer {} variance {v} is invalid", i + 1)));
            }
            if v <= VARIANCE_FLOOR {
                return Err(Error::DegenerateOperator { layer: i + 1 });
            }
        }
        Ok(LayerVariances { n, sigma2 })
    }

    pub fn constant(n: usize, sigma2: f64, depth: usize) -> Result<Self> {
        Self::new(n, vec![sigma2; depth])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.sigma2.len()
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    /// `ln(n σ²_{S_l})` for every layer.
    pub fn log_propagation(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n as f64;
        self.sigma2.iter().map(move |s| (n * s).ln())
    }

    /// `K̄`, the mean over layers of `ln(n σ²_{S_l})`.
    pub fn kbar(&self) -> f64 {
        self.log_propagation().sum::<f64>() / self.depth() as f64
    }
}

impl Serialize for LayerVariances {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("LayerVariances", 3)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("sigma2", &self.sigma2)?;
        st.serialize_field("kbar", &self.kbar())?;
        st.end()
    }
}

pub fn layer_variances(g: &Graph, spec: &PropagationSpec, depth: usize) -> Result<LayerVariances> {
    check_depth(spec, depth)?;
    let n = g.node_count();
    let sigma2 = match spec.layers {
        LayerPlan::Same | LayerPlan::Collapsed => {
            vec![population_variance(&build_operator(g, spec, 1)?); depth]
        }
        LayerPlan::PerLayer(_) => (1..=depth)
            .into_par_iter()
            .map(|l| build_operator(g, spec, l).map(|s| population_variance(&s)))
            .collect::<Result<Vec<_>>>()?,
    };
    LayerVariances::new(n, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense `D̂^{-1/2}(A+I)D̂^{-1/2}` built entry by entry.
    fn dense_gcn(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for &(u, v) in edges {
            a[u * n + v] = 1.0;
            a[v * n + u] = 1.0;
        }
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j]).sum()).collect();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = a[i * n + j] / (d[i] * d[j]).sqrt();
            }
        }
        out
    }

    fn dense_variance(m: &[f64]) -> f64 {
        let count = m.len() as f64;
        let mean = m.iter().sum::<f64>() / count;
        m.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count
    }

    #[test]
    fn p2_gcn_is_all_half() {
        let g = Graph::path(2).unwrap();
        let s = build_operator(&g, &PropagationSpec::gcn(), 1).unwrap();
        assert_eq!(s.to_dense(), vec![0.5; 4]);
        assert_eq!(population_variance(&s), 0.0);
    }

    #[test]
    fn existing_self_loops_not_doubled() {
        let with_loops = Graph::undirected(2, [(0, 1), (0, 0), (1, 1)]).unwrap();
        let s = build_operator(&with_loops, &PropagationSpec::gcn(), 1).unwrap();
        assert_eq!(s.to_dense(), vec![0.5; 4]);
    }

    #[test]
    fn star_gcn_matches_dense_oracle() {
        let g = Graph::star(4).unwrap();
        let s = build_operator(&g, &PropagationSpec::gcn(), 1).unwrap();
        let oracle = dense_gcn(4, &[(0, 1), (0, 2), (0, 3)]);
        for (a, b) in s.to_dense().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        let v = population_variance(&s);
        assert!((v - dense_variance(&oracle)).abs() < 1e-15);
        // 40-digit evaluation of the dense definition
        assert!((v - 0.039_112_807_802_895_51).abs() < 1e-15, "{v}");
    }

    #[test]
    fn identity_variance() {
        let v = population_variance(&CsrMatrix::identity(2));
        assert_eq!(v, 0.25);
    }

    #[test]
    fn sgc_one_equals_gcn() {
        let g = Graph::undirected(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        let gcn = build_operator(&g, &PropagationSpec::gcn(), 1).unwrap();
        let sgc = build_operator(&g, &PropagationSpec::new(Operator::SgcPower { k: 1 }), 1).unwrap();
        assert_eq!(gcn, sgc);
    }

    #[test]
    fn s2gc_and_custom_agree() {
        let g = Graph::path(6).unwrap();
        let s2 = build_operator(&g, &PropagationSpec::new(Operator::S2gcAverage { k: 3 }), 1).unwrap();
        let third = 1.0 / 3.0;
        let poly = PropagationSpec::new(Operator::CustomPolynomial {
            coefficients: vec![0.0, third, third, third],
        });
        let p = build_operator(&g, &poly, 1).unwrap();
        for (a, b) in s2.to_dense().iter().zip(p.to_dense()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ppr_rows_sum_to_one() {
        let g = Graph::star(7).unwrap();
        let k = build_dense_kernel(&g, &Operator::PprDiffusion { alpha: 0.15, order: 10 }).unwrap();
        for s in k.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_kernel_overflow_and_validation() {
        let g = Graph::path(3).unwrap();
        let err = build_dense_kernel(&g, &Operator::HeatKernelDiffusion { t: 800.0, order: 5 });
        assert!(matches!(err, Err(Error::Overflow(_))));
        assert!(Operator::HeatKernelDiffusion { t: -1.0, order: 5 }.validate().is_err());
        assert!(Operator::PprDiffusion { alpha: 1.0, order: 5 }.validate().is_err());
        assert!(Operator::CustomPolynomial { coefficients: vec![0.0, 0.0] }.validate().is_err());
        assert!(Operator::SgcPower { k: 0 }.validate().is_err());
    }

    #[test]
    fn sparsification_to_empty_is_an_error() {
        let g = Graph::path(4).unwrap();
        let spec = PropagationSpec::gcn().with_sparsification(Sparsification::Threshold(10.0));
        assert!(matches!(build_operator(&g, &spec, 1), Err(Error::EmptyOperator)));
    }

    #[test]
    fn diffusions_are_thresholded_by_default() {
        let g = Graph::path(30).unwrap();
        let op = Operator::HeatKernelDiffusion { t: 1.0, order: 20 };
        let dense = build_dense_kernel(&g, &op).unwrap();
        let s = build_operator(&g, &PropagationSpec::new(op), 1).unwrap();
        assert!(s.nnz() < dense.nnz());
        assert!(s.values().iter().all(|v| v.abs() >= DEFAULT_DIFFUSION_EPS));
    }

    #[test]
    fn layer_variance_examples() {
        let p2 = Graph::path(2).unwrap();
        assert!(matches!(
            layer_variances(&p2, &PropagationSpec::gcn(), 2),
            Err(Error::DegenerateOperator { layer: 1 })
        ));

        let star = Graph::star(4).unwrap();
        let lv = layer_variances(&star, &PropagationSpec::gcn(), 3).unwrap();
        let oracle = dense_variance(&dense_gcn(4, &[(0, 1), (0, 2), (0, 3)]));
        assert!((lv.kbar() - (4.0 * oracle).ln()).abs() < 1e-14);
        assert_eq!(lv.depth(), 3);

        let unit = LayerVariances::constant(50, 1.0 / 50.0, 4).unwrap();
        assert!(unit.kbar().abs() < 1e-15);
    }

    #[test]
    fn collapsed_and_per_layer_plans() {
        let g = Graph::star(5).unwrap();
        let mut spec = PropagationSpec::new(Operator::SgcPower { k: 2 });
        spec.layers = LayerPlan::Collapsed;
        assert!(layer_variances(&g, &spec, 1).is_ok());
        assert!(layer_variances(&g, &spec, 2).is_err());

        spec.layers = LayerPlan::PerLayer(vec![Operator::GcnSymNorm, Operator::SgcPower { k: 2 }]);
        let lv = layer_variances(&g, &spec, 2).unwrap();
        assert_ne!(lv.sigma2()[0], lv.sigma2()[1]);
        assert!(layer_variances(&g, &spec, 3).is_err());
    }

    #[test]
    fn shorthand_parsing() {
        assert_eq!("gcn".parse::<Operator>().unwrap(), Operator::GcnSymNorm);
        assert_eq!("sgc:k=3".parse::<Operator>().unwrap(), Operator::SgcPower { k: 3 });
        assert_eq!(
            "ppr:alpha=0.2,order=60".parse::<Operator>().unwrap(),
            Operator::PprDiffusion { alpha: 0.2, order: 60 }
        );
        assert_eq!(
            "poly:0,1,0.5".parse::<Operator>().unwrap(),
            Operator::CustomPolynomial { coefficients: vec![0.0, 1.0, 0.5] }
        );
        assert!("sgc".parse::<Operator>().is_err());
        assert!("nope".parse::<Operator>().is_err());
        for op in ["gcn", "sgc:k=2", "s2gc:k=4", "heat:t=2,order=10", "ppr:alpha=0.1,order=50"] {
            let parsed: Operator = op.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<Operator>().unwrap(), parsed);
        }
    }

    #[test]
    fn spec_json_shape() {
        let spec: PropagationSpec =
            serde_json::from_str(r#"{"family":"ppr-diffusion","alpha":0.1}"#).unwrap();
        assert_eq!(spec.operator, Operator::PprDiffusion { alpha: 0.1, order: DEFAULT_PPR_ORDER });
        assert_eq!(spec.layers, LayerPlan::Same);
        let spec: PropagationSpec = serde_json::from_str(
            r#"{"family":"gcn-sym-norm","sparsification":{"top-k":3},"layers":"collapsed"}"#,
        )
        .unwrap();
        assert_eq!(spec.sparsification, Some(Sparsification::TopK(3)));
        assert_eq!(spec.layers, LayerPlan::Collapsed);
    }
}
