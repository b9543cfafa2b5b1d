//! Width and depth selection: maximize φ over log-widths at each depth subject
//! to the threshold, regime and effective-capacity band constraints, then
//! round to integers and repair.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{self, CapacityReport, WidthProfile};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphStats};
use crate::propagation::{self, LayerPlan, LayerVariances, PropagationSpec};
use crate::sqp::{self, Problem};
use crate::LN_2PI_E;

/// Positive margin kept on every retention-ratio denominator during the
/// continuous solve so that φ₀ stays defined along the search path.
const DENOMINATOR_MARGIN: f64 = 1e-6;
/// Upper bound on candidate neighbours examined by the integer repair.
const REPAIR_BUDGET: usize = 200_000;

fn default_depth_min() -> usize {
    1
}
fn default_depth_max() -> usize {
    20
}
fn default_w_max() -> usize {
    1 << 15
}
fn default_eps() -> f64 {
    1e-6
}
fn default_multistart() -> usize {
    8
}
fn default_max_iter() -> usize {
    500
}
fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eta: f64,
    #[serde(default = "default_depth_min")]
    pub depth_min: usize,
    #[serde(default = "default_depth_max")]
    pub depth_max: usize,
    #[serde(default = "default_w_max")]
    pub w_max: usize,
    #[serde(default = "default_eps")]
    pub strictness_eps: f64,
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl SolverConfig {
    pub fn new(eta: f64) -> Self {
        SolverConfig {
            eta,
            depth_min: default_depth_min(),
            depth_max: default_depth_max(),
            w_max: default_w_max(),
            strictness_eps: default_eps(),
            multistart: default_multistart(),
            seed: 0,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid(format!("eta={} must lie in (0, 1]", self.eta)));
        }
        if self.depth_min < 1 || self.depth_max < self.depth_min {
            return Err(Error::invalid(format!(
                "depth range {}..{} is empty or starts below 1",
                self.depth_min, self.depth_max
            )));
        }
        if self.w_max < 2 {
            return Err(Error::invalid("w_max must be at least 2"));
        }
        if !(self.strictness_eps.is_finite() && self.strictness_eps >= 0.0) {
            return Err(Error::invalid("strictness_eps must be a nonnegative number"));
        }
        if self.multistart < 1 {
            return Err(Error::invalid("multistart must be at least 1"));
        }
        if self.max_iter < 1 || !(self.tol > 0.0) {
            return Err(Error::invalid("max_iter must be positive and tol > 0"));
        }
        Ok(())
    }
}

/// Per-layer operator variances available to the planner for any depth.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable {
    n: usize,
    kind: TableKind,
}

#[derive(Debug, Clone, PartialEq)]
enum TableKind {
    Same(f64),
    Listed(Vec<f64>),
    SingleLayer(f64),
}

impl VarianceTable {
    /// The same `σ²_S` at every layer.
    pub fn constant(n: usize, sigma2: f64) -> Result<Self> {
        LayerVariances::new(n, vec![sigma2])?;
        Ok(VarianceTable { n, kind: TableKind::Same(sigma2) })
    }

    /// Explicit per-layer variances; depths beyond the list are unsupported.
    pub fn listed(n: usize, sigma2: Vec<f64>) -> Result<Self> {
        LayerVariances::new(n, sigma2.clone())?;
        Ok(VarianceTable { n, kind: TableKind::Listed(sigma2) })
    }

    pub fn from_graph(g: &Graph, spec: &PropagationSpec) -> Result<Self> {
        spec.validate()?;
        let n = g.node_count();
        let kind = match &spec.layers {
            LayerPlan::Same => {
                TableKind::Same(propagation::layer_variances(g, spec, 1)?.sigma2()[0])
            }
            LayerPlan::Collapsed => {
                TableKind::SingleLayer(propagation::layer_variances(g, spec, 1)?.sigma2()[0])
            }
            LayerPlan::PerLayer(ops) => {
                TableKind::Listed(propagation::layer_variances(g, spec, ops.len())?.sigma2().to_vec())
            }
        };
        Ok(VarianceTable { n, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn for_depth(&self, depth: usize) -> Result<LayerVariances> {
        if depth == 0 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        match &self.kind {
            TableKind::Same(s) => LayerVariances::constant(self.n, *s, depth),
            TableKind::SingleLayer(s) if depth == 1 => LayerVariances::constant(self.n, *s, 1),
            TableKind::SingleLayer(_) => {
                Err(Error::invalid("collapsed operator mode only supports depth 1"))
            }
            TableKind::Listed(v) if depth <= v.len() => LayerVariances::new(self.n, v[..depth].to_vec()),
            TableKind::Listed(v) => Err(Error::invalid(format!(
                "only {} per-layer operators are configured, depth {depth} requested",
                v.len()
            ))),
        }
    }
}

/// Outcome of the independent constraint re-check on one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub above_threshold: bool,
    pub wide_regime: bool,
    pub phi0_lower: bool,
    pub phi0_upper: bool,
    pub phi0_defined: bool,
}

impl ConstraintCheck {
    pub fn feasible(&self) -> bool {
        self.phi0_defined && self.above_threshold && self.wide_regime && self.phi0_lower && self.phi0_upper
    }
}

/// Checks the four planning constraints on `prof` through the capacity module.
pub fn check_constraints(
    stats: &GraphStats,
    vars: &LayerVariances,
    prof: &WidthProfile,
    eta: f64,
    eps: f64,
) -> Result<ConstraintCheck> {
    let wbar = capacity::geometric_mean_width(prof);
    let wbar_star = capacity::width_threshold(stats, vars, prof)?;
    let kbar = vars.kbar();
    let ln_n = stats.max_entropy();
    let (defined, lower, upper) = match capacity::effective_capacity(stats, vars, prof) {
        Ok(e) => (true, e.phi0 >= ln_n, e.phi0 <= ln_n / eta),
        Err(Error::RetentionUndefined { .. }) => (false, false, false),
        Err(e) => return Err(e),
    };
    Ok(ConstraintCheck {
        above_threshold: wbar > wbar_star * (1.0 + eps),
        wide_regime: wbar.ln() > -kbar + eps,
        phi0_lower: lower,
        phi0_upper: upper,
        phi0_defined: defined,
    })
}

/// Continuous problem at one depth `L ≥ 2` over `x_l = ln w_l`, `l = 1..L-1`.
struct DepthProblem {
    ln_m: f64,
    ln_wl: f64,
    log_prop: Vec<f64>,
    ln_n: f64,
    eta: f64,
    eps: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DepthProblem {
    fn new(stats: &GraphStats, vars: &LayerVariances, cfg: &SolverConfig) -> Self {
        let free = vars.depth() - 1;
        DepthProblem {
            ln_m: (stats.m as f64).ln(),
            ln_wl: (stats.num_classes as f64).ln(),
            log_prop: vars.log_propagation().collect(),
            ln_n: stats.max_entropy(),
            eta: cfg.eta,
            eps: cfg.strictness_eps,
            lo: vec![2f64.ln(); free],
            hi: vec![(cfg.w_max as f64).ln(); free],
        }
    }

    fn depth(&self) -> usize {
        self.log_prop.len()
    }

    fn log_widths(&self, x: &[f64]) -> Vec<f64> {
        let mut lw = Vec::with_capacity(x.len() + 2);
        lw.push(self.ln_m);
        lw.extend_from_slice(x);
        lw.push(self.ln_wl);
        lw
    }

    fn ln_wbar_star(&self) -> f64 {
        let l = self.depth() as f64;
        1.0 - (LN_2PI_E + self.ln_m - self.ln_wl + self.log_prop.iter().sum::<f64>()) / l
    }
}

impl Problem for DepthProblem {
    fn dim(&self) -> usize {
        self.depth() - 1
    }

    fn num_constraints(&self) -> usize {
        4 + self.depth()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        -capacity::phi_from_logs(&self.log_widths(x), &self.log_prop)
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let lw = self.log_widths(x);
        let ln_wbar = capacity::log_wbar_from_logs(&lw);
        let kbar = self.log_prop.iter().sum::<f64>() / self.depth() as f64;
        let phi0 = capacity::phi0_from_logs(&lw, &self.log_prop).unwrap_or(f64::NAN);
        out[0] = ln_wbar - self.ln_wbar_star() - self.eps.ln_1p();
        out[1] = ln_wbar + kbar - self.eps;
        out[2] = phi0 - self.ln_n;
        out[3] = self.ln_n / self.eta - phi0;
        let mut cumulative = LN_2PI_E;
        for (l, k) in self.log_prop.iter().enumerate() {
            cumulative += lw[l] + k;
            out[4 + l] = cumulative - DENOMINATOR_MARGIN;
        }
    }

    fn lower(&self) -> &[f64] {
        &self.lo
    }

    fn upper(&self) -> &[f64] {
        &self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitecturePlan {
    pub depth: usize,
    /// `w_0..w_L`; empty when the depth could not be analysed at all.
    pub widths: Vec<usize>,
    pub report: Option<CapacityReport>,
    pub feasible: bool,
    pub parameter_count: u64,
    pub solve_time_seconds: f64,
    /// Best continuous widths before rounding.
    pub continuous_solution: Vec<f64>,
    pub restarts: usize,
    pub restarts_converged: usize,
    pub hit_iteration_cap: bool,
    pub diagnostic: Option<String>,
}

impl ArchitecturePlan {
    pub fn phi(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.phi)
    }

    /// True when every restart converged without hitting the iteration cap.
    pub fn solver_converged(&self) -> bool {
        self.restarts_converged == self.restarts && !self.hit_iteration_cap
    }
}

fn parameter_count(widths: &[usize]) -> u64 {
    widths.windows(2).map(|p| p[0] as u64 * p[1] as u64).sum()
}

/// Nearest integer, clamped to `[2, w_max]`.
pub fn round_width(w: f64, w_max: usize) -> usize {
    (w.round().max(2.0) as usize).min(w_max)
}

fn integer_profile(widths: &[usize]) -> WidthProfile {
    WidthProfile::from_integers(widths).expect("rounded widths are at least 2")
}

/// Rounds the interior widths of `continuous` (full `w_0..w_L`) and, if a
/// constraint fails, searches adjustments in `{-2..2}` per width ordered by
/// total absolute adjustment, keeping the largest φ at the first level with a
/// feasible neighbour.
pub fn round_and_repair(
    continuous: &[f64],
    stats: &GraphStats,
    vars: &LayerVariances,
    cfg: &SolverConfig,
) -> Result<Option<Vec<usize>>> {
    let depth = continuous.len() - 1;
    let mut base: Vec<usize> = continuous.iter().map(|&w| round_width(w, cfg.w_max)).collect();
    base[0] = stats.m;
    base[depth] = stats.num_classes;
    let free = depth - 1;

    let feasible = |w: &[usize]| -> Result<Option<f64>> {
        let prof = integer_profile(w);
        let check = check_constraints(stats, vars, &prof, cfg.eta, cfg.strictness_eps)?;
        if check.feasible() {
            Ok(Some(capacity::channel_capacity(stats, vars, &prof)?))
        } else {
            Ok(None)
        }
    };

    if feasible(&base)?.is_some() {
        return Ok(Some(base));
    }
    let mut budget = REPAIR_BUDGET;
    for total in 1..=2 * free {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut adj = vec![0i64; free];
        let mut exhausted = false;
        let mut result = Ok(());
        enumerate_adjustments(&mut adj, 0, total as i64, &mut |a| {
            if budget == 0 {
                exhausted = true;
                return false;
            }
            budget -= 1;
            let mut w = base.clone();
            for (i, &d) in a.iter().enumerate() {
                let v = w[i + 1] as i64 + d;
                if v < 2 || v > cfg.w_max as i64 {
                    return true;
                }
                w[i + 1] = v as usize;
            }
            match feasible(&w) {
                Ok(Some(phi)) => {
                    if best.as_ref().is_none_or(|(b, _)| phi > *b) {
                        best = Some((phi, w));
                    }
                    true
                }
                Ok(None) => true,
                Err(e) => {
                    result = Err(e);
                    false
                }
            }
        });
        result?;
        if let Some((_, w)) = best {
            return Ok(Some(w));
        }
        if exhausted {
            break;
        }
    }
    Ok(None)
}

/// Visits every vector in `{-2..2}^len` with `Σ|a_i| = remaining`.
fn enumerate_adjustments(adj: &mut [i64], pos: usize, remaining: i64, visit: &mut dyn FnMut(&[i64]) -> bool) -> bool {
    if pos == adj.len() {
        return if remaining == 0 { visit(adj) } else { true };
    }
    let slots_left = (adj.len() - pos - 1) as i64;
    for d in [0i64, -1, 1, -2, 2] {
        let r = remaining - d.abs();
        if r < 0 || r > 2 * slots_left {
            continue;
        }
        adj[pos] = d;
        if !enumerate_adjustments(adj, pos + 1, r, visit) {
            adj[pos] = 0;
            return false;
        }
    }
    adj[pos] = 0;
    true
}

fn start_points(problem: &DepthProblem, cfg: &SolverConfig) -> Vec<Vec<f64>> {
    let depth = problem.depth();
    let free = depth - 1;
    let mut starts = Vec::with_capacity(cfg.multistart);
    let smooth: Vec<f64> = (1..depth)
        .map(|l| {
            let t = l as f64 / depth as f64;
            (problem.ln_m + t * (problem.ln_wl - problem.ln_m)).clamp(problem.lo[0], problem.hi[0])
        })
        .collect();
    starts.push(smooth);
    let stream = cfg.seed ^ (depth as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    while starts.len() < cfg.multistart {
        starts.push((0..free).map(|j| rng.gen_range(problem.lo[j]..=problem.hi[j])).collect());
    }
    starts
}

fn infeasible_plan(depth: usize, started: Instant, diagnostic: String) -> ArchitecturePlan {
    ArchitecturePlan {
        depth,
        widths: Vec::new(),
        report: None,
        feasible: false,
        parameter_count: 0,
        solve_time_seconds: started.elapsed().as_secs_f64(),
        continuous_solution: Vec::new(),
        restarts: 0,
        restarts_converged: 0,
        hit_iteration_cap: false,
        diagnostic: Some(diagnostic),
    }
}

fn finish_plan(
    stats: &GraphStats,
    vars: &LayerVariances,
    widths: Vec<usize>,
    feasible: bool,
    continuous: Vec<f64>,
    started: Instant,
) -> ArchitecturePlan {
    let prof = integer_profile(&widths);
    let (report, diagnostic) = match capacity::evaluate(stats, vars, &prof) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ArchitecturePlan {
        depth: widths.len() - 1,
        parameter_count: parameter_count(&widths),
        widths,
        report,
        feasible,
        solve_time_seconds: started.elapsed().as_secs_f64(),
        continuous_solution: continuous,
        restarts: 0,
        restarts_converged: 0,
        hit_iteration_cap: false,
        diagnostic,
    }
}

/// Solves the continuous problem at one depth and returns every restart's
/// outcome as full width vectors `w_0..w_L`, best φ first among feasible ones.
pub fn solve_fixed_depth(
    stats: &GraphStats,
    vars: &LayerVariances,
    cfg: &SolverConfig,
) -> Result<Vec<ContinuousSolution>> {
    cfg.validate()?;
    let problem = DepthProblem::new(stats, vars, cfg);
    let opts = sqp::Options { max_iter: cfg.max_iter, tol: cfg.tol, feas_tol: 1e-9 };
    let mut out: Vec<ContinuousSolution> = start_points(&problem, cfg)
        .into_iter()
        .map(|x0| {
            let o = sqp::minimize(&problem, &x0, &opts);
            ContinuousSolution {
                widths: problem.log_widths(&o.x).iter().map(|v| v.exp()).collect(),
                phi: -o.objective,
                feasible: o.is_feasible(opts.feas_tol),
                max_violation: o.max_violation,
                converged: o.converged,
                hit_iteration_cap: o.hit_iteration_cap,
                iterations: o.iterations,
            }
        })
        .collect();
    // feasible first by φ, then infeasible by violation; stable keeps start order
    out.sort_by(|a, b| match (a.feasible, b.feasible) {
        (true, true) => b.phi.total_cmp(&a.phi),
        (true, false) => std::cmp::Ordering::Less,
        (false, true) => std::cmp::Ordering::Greater,
        (false, false) => a.max_violation.total_cmp(&b.max_violation),
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    pub widths: Vec<f64>,
    pub phi: f64,
    pub feasible: bool,
    pub max_violation: f64,
    pub converged: bool,
    pub hit_iteration_cap: bool,
    pub iterations: usize,
}

/// Plans a single depth: continuous solve, then rounding and repair.
pub fn plan_depth(
    stats: &GraphStats,
    vars: &LayerVariances,
    cfg: &SolverConfig,
) -> Result<ArchitecturePlan> {
    let started = Instant::now();
    let depth = vars.depth();
    if depth == 1 {
        let widths = vec![stats.m, stats.num_classes];
        let prof = integer_profile(&widths);
        let feasible = check_constraints(stats, vars, &prof, cfg.eta, cfg.strictness_eps)?.feasible();
        let continuous = widths.iter().map(|&w| w as f64).collect();
        let mut plan = finish_plan(stats, vars, widths, feasible, continuous, started);
        plan.restarts = 1;
        plan.restarts_converged = 1;
        return Ok(plan);
    }

    let solutions = solve_fixed_depth(stats, vars, cfg)?;
    let restarts = solutions.len();
    let restarts_converged = solutions.iter().filter(|s| s.converged).count();
    let hit_cap = solutions.iter().any(|s| s.hit_iteration_cap);

    let mut tried: Vec<Vec<usize>> = Vec::new();
    let mut chosen: Option<(Vec<usize>, Vec<f64>)> = None;
    for sol in &solutions {
        let rounded: Vec<usize> = sol.widths.iter().map(|&w| round_width(w, cfg.w_max)).collect();
        if tried.contains(&rounded) {
            continue;
        }
        tried.push(rounded);
        if let Some(w) = round_and_repair(&sol.widths, stats, vars, cfg)? {
            chosen = Some((w, sol.widths.clone()));
            break;
        }
    }

    let mut plan = match chosen {
        Some((w, cont)) => finish_plan(stats, vars, w, true, cont, started),
        None => {
            let best = &solutions[0];
            let mut w: Vec<usize> = best.widths.iter().map(|&w| round_width(w, cfg.w_max)).collect();
            w[0] = stats.m;
            w[depth] = stats.num_classes;
            let mut p = finish_plan(stats, vars, w, false, best.widths.clone(), started);
            p.diagnostic.get_or_insert_with(|| {
                format!(
                    "no feasible integer profile found (best continuous violation {:.3e})",
                    best.max_violation
                )
            });
            p
        }
    };
    plan.restarts = restarts;
    plan.restarts_converged = restarts_converged;
    plan.hit_iteration_cap = hit_cap;
    plan.solve_time_seconds = started.elapsed().as_secs_f64();
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub best: Option<ArchitecturePlan>,
    pub per_depth: Vec<ArchitecturePlan>,
    pub total_seconds: f64,
}

impl PlanResult {
    pub fn feasible(&self) -> bool {
        self.best.is_some()
    }

    /// Every depth's solve converged on every restart.
    pub fn optimal_guarantee(&self) -> bool {
        self.per_depth.iter().all(ArchitecturePlan::solver_converged)
    }
}

/// Picks the feasible plan with the largest φ; within `tol`, fewer parameters
/// win, then the shallower depth.
pub fn select_best(plans: &[ArchitecturePlan], tol: f64) -> Option<&ArchitecturePlan> {
    let mut best: Option<&ArchitecturePlan> = None;
    for p in plans.iter().filter(|p| p.feasible) {
        let Some(phi) = p.phi() else { continue };
        best = match best {
            None => Some(p),
            Some(b) => {
                let bphi = b.phi().unwrap();
                let better = if (phi - bphi).abs() < tol {
                    (p.parameter_count, p.depth) < (b.parameter_count, b.depth)
                } else {
                    phi > bphi
                };
                if better {
                    Some(p)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Plans every depth in the configured range and selects the best.
pub fn plan(stats: &GraphStats, table: &VarianceTable, cfg: &SolverConfig) -> Result<PlanResult> {
    cfg.validate()?;
    stats.validate()?;
    if table.n() != stats.n {
        return Err(Error::invalid(format!(
            "variances were computed for n={} but the statistics say n={}",
            table.n(),
            stats.n
        )));
    }
    let started = Instant::now();
    let per_depth = (cfg.depth_min..=cfg.depth_max)
        .into_par_iter()
        .map(|depth| {
            let t = Instant::now();
            match table.for_depth(depth) {
                Ok(vars) => plan_depth(stats, &vars, cfg),
                Err(e) if e.is_degenerate() => Err(e),
                Err(e) => Ok(infeasible_plan(depth, t, e.to_string())),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&per_depth, cfg.tol).cloned();
    Ok(PlanResult { best, per_depth, total_seconds: started.elapsed().as_secs_f64() })
}

pub fn plan_for_graph(
    graph: &Graph,
    m: usize,
    num_classes: usize,
    spec: &PropagationSpec,
    cfg: &SolverConfig,
) -> Result<PlanResult> {
    let stats = GraphStats::from_graph(graph, m, num_classes)?;
    let table = VarianceTable::from_graph(graph, spec)?;
    plan(&stats, &table, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSweepRecord {
    pub eta: f64,
    pub feasible: bool,
    pub best: Option<ArchitecturePlan>,
    pub solve_time_seconds: f64,
    pub optimal_guarantee: bool,
    pub error: Option<String>,
}

/// Runs [`plan`] once per η; a failing η is recorded and the sweep continues.
pub fn eta_sweep(
    stats: &GraphStats,
    table: &VarianceTable,
    cfg: &SolverConfig,
    etas: &[f64],
) -> Vec<EtaSweepRecord> {
    etas.iter()
        .map(|&eta| {
            let run = SolverConfig { eta, ..cfg.clone() };
            let started = Instant::now();
            let outcome = if eta > 0.0 && eta < 1.0 {
                plan(stats, table, &run)
            } else {
                Err(Error::invalid(format!("sweep eta={eta} must lie in (0, 1)")))
            };
            let elapsed = started.elapsed().as_secs_f64();
            match outcome {
                Ok(r) => EtaSweepRecord {
                    eta,
                    feasible: r.feasible(),
                    optimal_guarantee: r.optimal_guarantee(),
                    best: r.best,
                    solve_time_seconds: elapsed,
                    error: None,
                },
                Err(e) => EtaSweepRecord {
                    eta,
                    feasible: false,
                    best: None,
                    solve_time_seconds: elapsed,
                    optimal_guarantee: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (GraphStats, VarianceTable, SolverConfig) {
        let stats = GraphStats::new(100, 32, 4).unwrap();
        let table = VarianceTable::constant(100, 0.05).unwrap();
        let mut cfg = SolverConfig::new(0.5);
        cfg.w_max = 256;
        cfg.depth_max = 4;
        (stats, table, cfg)
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0).validate().is_err());
        assert!(SolverConfig::new(1.5).validate().is_err());
        assert!(SolverConfig::new(1.0).validate().is_ok());
        let mut c = SolverConfig::new(0.5);
        c.depth_min = 3;
        c.depth_max = 2;
        assert!(c.validate().is_err());
        let c: SolverConfig = serde_json::from_str(r#"{"eta":0.3}"#).unwrap();
        assert_eq!(c.depth_max, 20);
        assert_eq!(c.w_max, 32768);
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(round_width(127.5001, 1000), 128);
        assert_eq!(round_width(1.2, 1000), 2);
        assert_eq!(round_width(5000.0, 1000), 1000);
    }

    #[test]
    fn adjustments_enumerated_by_level() {
        let mut seen = Vec::new();
        let mut adj = vec![0i64; 2];
        enumerate_adjustments(&mut adj, 0, 2, &mut |a| {
            seen.push(a.to_vec());
            true
        });
        // {±2,0}, {0,±2}, {±1,±1}
        assert_eq!(seen.len(), 8);
        assert!(seen.iter().all(|a| a.iter().map(|v| v.abs()).sum::<i64>() == 2));
    }

    #[test]
    fn integral_feasible_solution_is_a_fixed_point() {
        let (stats, table, cfg) = fixture();
        let vars = table.for_depth(3).unwrap();
        let w = [32.0, 256.0, 256.0, 4.0];
        let prof = WidthProfile::new(w.to_vec()).unwrap();
        assert!(check_constraints(&stats, &vars, &prof, cfg.eta, cfg.strictness_eps).unwrap().feasible());
        assert_eq!(round_and_repair(&w, &stats, &vars, &cfg).unwrap(), Some(vec![32, 256, 256, 4]));
    }

    #[test]
    fn depth_one_is_a_direct_check() {
        let (stats, table, cfg) = fixture();
        let p = plan_depth(&stats, &table.for_depth(1).unwrap(), &cfg).unwrap();
        assert_eq!(p.widths, vec![32, 4]);
        let prof = WidthProfile::from_integers(&[32, 4]).unwrap();
        let check = check_constraints(&stats, &table.for_depth(1).unwrap(), &prof, 0.5, 1e-6).unwrap();
        assert_eq!(p.feasible, check.feasible());
    }

    #[test]
    fn fixture_plan_is_feasible_and_deterministic() {
        let (stats, table, cfg) = fixture();
        let a = plan(&stats, &table, &cfg).unwrap();
        let b = plan(&stats, &table, &cfg).unwrap();
        let best = a.best.as_ref().expect("fixture is feasible");
        let vars = table.for_depth(best.depth).unwrap();
        let prof = WidthProfile::from_integers(&best.widths).unwrap();
        assert!(check_constraints(&stats, &vars, &prof, cfg.eta, cfg.strictness_eps).unwrap().feasible());
        assert_eq!(a.best.as_ref().unwrap().widths, b.best.as_ref().unwrap().widths);
        assert_eq!(a.per_depth.len(), 4);
    }

    #[test]
    fn tie_break_prefers_fewer_parameters() {
        let mk = |depth: usize, phi: f64, params: u64| ArchitecturePlan {
            depth,
            widths: vec![2; depth + 1],
            report: Some(CapacityReport {
                phi,
                phi0: 0.0,
                theta: 0.0,
                wbar: 2.0,
                wbar_star: 1.0,
                kbar: 0.0,
                regime: capacity::Regime::Wide,
                per_layer: Vec::new(),
            }),
            feasible: true,
            parameter_count: params,
            solve_time_seconds: 0.0,
            continuous_solution: Vec::new(),
            restarts: 1,
            restarts_converged: 1,
            hit_iteration_cap: false,
            diagnostic: None,
        };
        let plans = vec![mk(2, 5.0, 100_000), mk(3, 5.0 + 1e-12, 10_000), mk(4, 4.0, 10)];
        assert_eq!(select_best(&plans, 1e-9).unwrap().depth, 3);
        let plans = vec![mk(3, 5.0, 10_000), mk(2, 5.0, 10_000)];
        assert_eq!(select_best(&plans, 1e-9).unwrap().depth, 2);
        let plans = vec![mk(2, 5.0, 10), mk(3, 6.0, 10_000)];
        assert_eq!(select_best(&plans, 1e-9).unwrap().depth, 3);
    }

    #[test]
    fn sweep_records_bad_eta_and_continues() {
        let (stats, table, mut cfg) = fixture();
        cfg.depth_max = 2;
        let recs = eta_sweep(&stats, &table, &cfg, &[1.5, 0.4]);
        assert_eq!(recs.len(), 2);
        assert!(recs[0].error.is_some());
        assert!(recs[1].error.is_none());
    }
}
