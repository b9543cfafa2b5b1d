//! Command-line front end: `analyze`, `plan`, `sweep-eta`, `probe`, `verify`.
//!
//! Every command writes one JSON document (or JSON lines for `probe`) to
//! stdout or `--out`. Values from `--config` are used unless the matching flag
//! is given. Exit codes: 0 success (infeasible plans included), 2 bad input,
//! 3 degenerate mathematics.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::capacity::WeightMoments;
use crate::entropy::{self, Binning, DEFAULT_COLLAPSE_FRACTION};
use crate::error::{Error, Result};
use crate::graph::{self, Graph, GraphFormat, GraphStats, LoadOptions, NodeWeightFunction};
use crate::mc::{self, McConfig};
use crate::planner::{self, ArchitecturePlan, PlanResult, SolverConfig, VarianceTable};
use crate::propagation::{self, LayerPlan, LayerVariances, Operator, PropagationSpec};
use crate::{json as out_json, matrix_io};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "c3e", version, about = "Channel-capacity width and depth planning for spectral graph networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graph statistics, per-layer operator variances and K̄.
    Analyze(AnalyzeArgs),
    /// Choose widths and depth by maximizing channel capacity.
    Plan(PlanArgs),
    /// Run the planner for several η values and report timings.
    SweepEta(SweepArgs),
    /// Entropy of matrix files.
    Probe(ProbeArgs),
    /// Monte-Carlo check of the variance recursion.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Edge list or Matrix Market file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// edge-list or matrix-market.
    #[arg(long)]
    pub format: Option<GraphFormat>,
    /// Keep edge orientation instead of symmetrizing.
    #[arg(long)]
    pub directed: bool,
    /// Node count; required without --graph, otherwise allows trailing isolated nodes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Input feature dimension w_0.
    #[arg(long)]
    pub m: Option<usize>,
    /// Output dimension w_L.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Operator shorthand (gcn, sgc:k=2, ppr:alpha=0.1,order=50, heat:t=3, s2gc:k=4, poly:c0,c1,..) or a JSON file.
    #[arg(long)]
    pub spec: Option<String>,
    /// Use this constant operator variance at every layer instead of a graph.
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of these options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long)]
    pub log_level: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub depth_min: Option<usize>,
    #[arg(long)]
    pub depth_max: Option<usize>,
    #[arg(long)]
    pub w_max: Option<usize>,
    #[arg(long)]
    pub strictness_eps: Option<f64>,
    #[arg(long)]
    pub multistart: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Report every timing as zero so output is reproducible byte for byte.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of layers to analyse.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Write each layer operator as Matrix Market into this directory.
    #[arg(long)]
    pub dump_operators: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated η values in (0, 1).
    #[arg(long, value_delimiter = ',')]
    pub etas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Matrix files (binary or whitespace text).
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// auto, a bin count, or width=<h>.
    #[arg(long, default_value = "auto")]
    pub bins: String,
    /// Emit one transition table across all files instead of per-file lines.
    #[arg(long)]
    pub transition: bool,
    #[arg(long, default_value_t = DEFAULT_COLLAPSE_FRACTION)]
    pub collapse_fraction: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub log_level: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated w_0..w_L.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Weight mean for every layer.
    #[arg(long)]
    pub weight_mean: Option<f64>,
    /// Weight variance for every layer.
    #[arg(long)]
    pub weight_variance: Option<f64>,
    #[arg(long)]
    pub input_variance: Option<f64>,
    /// Also write one trial's layer matrices here.
    #[arg(long)]
    pub dump_layers: Option<PathBuf>,
}

/// Options readable from `--config`; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub format: Option<GraphFormat>,
    pub directed: Option<bool>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub classes: Option<usize>,
    pub spec: Option<Value>,
    pub sigma2: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub log_level: Option<String>,
    pub eta: Option<f64>,
    pub depth: Option<usize>,
    pub depth_min: Option<usize>,
    pub depth_max: Option<usize>,
    pub w_max: Option<usize>,
    pub strictness_eps: Option<f64>,
    pub multistart: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub etas: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub weight_mean: Option<f64>,
    pub weight_variance: Option<f64>,
    pub input_variance: Option<f64>,
    pub no_timings: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// The graph side of a run: either a loaded graph with an operator spec,
/// or a bare node count with a constant variance.
enum Source {
    Graph { graph: Graph, spec: PropagationSpec },
    Constant { n: usize, sigma2: f64 },
}

impl Source {
    fn n(&self) -> usize {
        match self {
            Source::Graph { graph, .. } => graph.node_count(),
            Source::Constant { n, .. } => *n,
        }
    }

    fn table(&self) -> Result<VarianceTable> {
        match self {
            Source::Graph { graph, spec } => VarianceTable::from_graph(graph, spec),
            Source::Constant { n, sigma2 } => VarianceTable::constant(*n, *sigma2),
        }
    }

    fn variances(&self, depth: usize) -> Result<LayerVariances> {
        match self {
            Source::Graph { graph, spec } => propagation::layer_variances(graph, spec, depth),
            Source::Constant { n, sigma2 } => LayerVariances::constant(*n, *sigma2, depth),
        }
    }

    fn spec_json(&self) -> Value {
        match self {
            Source::Graph { spec, .. } => spec_to_json(spec),
            Source::Constant { sigma2, .. } => json!({"family": "constant-variance", "params": {"sigma2": sigma2}}),
        }
    }

    fn graph_json(&self, m: Option<usize>, classes: Option<usize>) -> Value {
        let mut g = Map::new();
        g.insert("n".into(), json!(self.n()));
        g.insert("m".into(), json!(m));
        g.insert("classes".into(), json!(classes));
        if let Source::Graph { graph, .. } = self {
            g.insert("edge_count".into(), json!(graph.edge_count()));
            g.insert("directed".into(), json!(graph.is_directed()));
        }
        Value::Object(g)
    }
}

fn spec_to_json(spec: &PropagationSpec) -> Value {
    let mut params = match serde_json::to_value(&spec.operator) {
        Ok(Value::Object(map)) => map,
        _ => Map::new(),
    };
    let family = params.remove("family").unwrap_or(Value::Null);
    if spec.layers != LayerPlan::Same {
        params.insert("layers".into(), serde_json::to_value(&spec.layers).unwrap_or(Value::Null));
    }
    if let Some(s) = &spec.sparsification {
        params.insert("sparsification".into(), serde_json::to_value(s).unwrap_or(Value::Null));
    }
    json!({"family": family, "params": params})
}

fn parse_spec(text: &str) -> Result<PropagationSpec> {
    let path = Path::new(text);
    if text.ends_with(".json") || path.is_file() {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: PropagationSpec = serde_json::from_str(&body)
            .map_err(|e| Error::invalid(format!("{text}: {e}")))?;
        spec.validate()?;
        return Ok(spec);
    }
    Ok(PropagationSpec::new(text.parse::<Operator>()?))
}

fn spec_from_value(v: &Value) -> Result<PropagationSpec> {
    match v {
        Value::String(s) => parse_spec(s),
        other => {
            let spec: PropagationSpec = serde_json::from_value(other.clone())
                .map_err(|e| Error::invalid(format!("config spec: {e}")))?;
            spec.validate()?;
            Ok(spec)
        }
    }
}

/// Shared option resolution for the graph-based commands.
struct Resolved {
    file: RunConfig,
    source: Source,
    m: Option<usize>,
    classes: Option<usize>,
    seed: u64,
    out: Option<PathBuf>,
}

fn resolve(common: &CommonArgs) -> Result<Resolved> {
    let file = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let graph_path = pick(common.graph.clone(), file.graph.clone());
    let n = pick(common.n, file.n);
    let sigma2 = pick(common.sigma2, file.sigma2);
    let spec = match (&common.spec, &file.spec) {
        (Some(s), _) => Some(parse_spec(s)?),
        (None, Some(v)) => Some(spec_from_value(v)?),
        (None, None) => None,
    };

    let source = match (graph_path, sigma2) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid("--graph and --sigma2 are mutually exclusive"));
        }
        (Some(path), None) => {
            let format = match pick(common.format, file.format) {
                Some(f) => f,
                None => guess_format(&path),
            };
            let directed = common.directed || file.directed.unwrap_or(false);
            let opts = LoadOptions { format, n, directed };
            let graph = graph::load_graph(&path, opts)?;
            log::info!("loaded {} with n={} and {} edges", path.display(), graph.node_count(), graph.edge_count());
            Source::Graph { graph, spec: spec.unwrap_or_else(PropagationSpec::gcn) }
        }
        (None, Some(sigma2)) => {
            if spec.is_some() {
                return Err(Error::invalid("--spec needs --graph; --sigma2 fixes the variance directly"));
            }
            let n = n.ok_or_else(|| Error::invalid("--sigma2 needs --n"))?;
            if n == 0 {
                return Err(Error::invalid("--n must be positive"));
            }
            Source::Constant { n, sigma2 }
        }
        (None, None) => return Err(Error::invalid("either --graph or --sigma2 with --n is required")),
    };

    Ok(Resolved {
        m: pick(common.m, file.m),
        classes: pick(common.classes, file.classes),
        seed: pick(common.seed, file.seed).unwrap_or(0),
        out: pick(common.out.clone(), file.out.clone()),
        source,
        file,
    })
}

fn guess_format(path: &Path) -> GraphFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") | Some("mm") => GraphFormat::MatrixMarket,
        _ => GraphFormat::EdgeList,
    }
}

fn solver_config(r: &Resolved, args: &SolverArgs, eta: Option<f64>) -> Result<SolverConfig> {
    let f = &r.file;
    let eta = eta.ok_or_else(|| Error::invalid("--eta is required"))?;
    let mut cfg = SolverConfig::new(eta);
    cfg.seed = r.seed;
    if let Some(v) = pick(args.depth_min, f.depth_min) {
        cfg.depth_min = v;
    }
    if let Some(v) = pick(args.depth_max, f.depth_max) {
        cfg.depth_max = v;
    }
    if let Some(v) = pick(args.w_max, f.w_max) {
        cfg.w_max = v;
    }
    if let Some(v) = pick(args.strictness_eps, f.strictness_eps) {
        cfg.strictness_eps = v;
    }
    if let Some(v) = pick(args.multistart, f.multistart) {
        cfg.multistart = v;
    }
    if let Some(v) = pick(args.max_iter, f.max_iter) {
        cfg.max_iter = v;
    }
    if let Some(v) = pick(args.tol, f.tol) {
        cfg.tol = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stats_for(r: &Resolved) -> Result<GraphStats> {
    let m = r.m.ok_or_else(|| Error::invalid("--m is required"))?;
    let classes = r.classes.ok_or_else(|| Error::invalid("--classes is required"))?;
    match &r.source {
        Source::Graph { graph, .. } => GraphStats::from_graph(graph, m, classes),
        Source::Constant { n, .. } => GraphStats::new(*n, m, classes),
    }
}

fn plan_entry(p: &ArchitecturePlan, no_timings: bool) -> Value {
    let r = p.report.as_ref();
    json!({
        "L": p.depth,
        "widths": p.widths,
        "continuous_widths": p.continuous_solution,
        "phi": r.map(|r| r.phi),
        "phi0": r.map(|r| r.phi0),
        "theta": r.map(|r| r.theta),
        "wbar": r.map(|r| r.wbar),
        "wbar_star": r.map(|r| r.wbar_star),
        "kbar": r.map(|r| r.kbar),
        "regime": r.map(|r| r.regime),
        "parameter_count": p.parameter_count,
        "feasible": p.feasible,
        "restarts": p.restarts,
        "restarts_converged": p.restarts_converged,
        "hit_iteration_cap": p.hit_iteration_cap,
        "diagnostic": p.diagnostic,
        "solve_time_seconds": if no_timings { 0.0 } else { p.solve_time_seconds },
    })
}

fn plan_json(r: &Resolved, cfg: &SolverConfig, result: &PlanResult, no_timings: bool) -> Value {
    let time = |t: f64| if no_timings { 0.0 } else { t };
    json!({
        "graph": r.source.graph_json(r.m, r.classes),
        "spec": r.source.spec_json(),
        "eta": cfg.eta,
        "solver": cfg,
        "feasible": result.feasible(),
        "optimal_guarantee": result.optimal_guarantee(),
        "best": result.best.as_ref().map(|p| plan_entry(p, no_timings)),
        "per_depth": result.per_depth.iter().map(|p| plan_entry(p, no_timings)).collect::<Vec<_>>(),
        "timings": {
            "total_seconds": time(result.total_seconds),
            "per_depth": result.per_depth.iter().map(|p| time(p.solve_time_seconds)).collect::<Vec<_>>(),
        },
        "seed": cfg.seed,
        "version": VERSION,
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> Result<String> {
    out_json::to_string_pretty(v).map_err(|e| Error::invalid(format!("serialization failed: {e}")))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String> {
    let r = resolve(&args.common)?;
    let depth = pick(args.depth, r.file.depth).unwrap_or(1);
    if depth == 0 {
        return Err(Error::invalid("--depth must be at least 1"));
    }
    let vars = r.source.variances(depth)?;
    if let (Some(dir), Source::Graph { graph, spec }) = (&args.dump_operators, &r.source) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (l, s) in propagation::layer_operators(graph, spec, depth)?.iter().enumerate() {
            let path = dir.join(format!("layer{}.mtx", l + 1));
            fs::write(&path, s.to_matrix_market()).map_err(|e| Error::io(&path, e))?;
        }
    }
    let n = r.source.n();
    let graph_entropy = match &r.source {
        Source::Graph { graph, .. } => graph::graph_entropy(graph, &NodeWeightFunction::Degree).ok(),
        Source::Constant { .. } => None,
    };
    let v = json!({
        "graph": r.source.graph_json(r.m, r.classes),
        "spec": r.source.spec_json(),
        "depth": depth,
        "sigma2": vars.sigma2(),
        "log_propagation": vars.log_propagation().collect::<Vec<_>>(),
        "kbar": vars.kbar(),
        "max_entropy": graph::max_graph_entropy(n),
        "graph_entropy": graph_entropy,
        "version": VERSION,
    });
    let text = pretty(&v)?;
    emit(&text, r.out.as_deref())?;
    Ok(text)
}

pub fn cmd_plan(args: &PlanArgs) -> Result<String> {
    let r = resolve(&args.common)?;
    let cfg = solver_config(&r, &args.solver, pick(args.eta, r.file.eta))?;
    let stats = stats_for(&r)?;
    let table = r.source.table()?;
    let result = planner::plan(&stats, &table, &cfg)?;
    log::info!("planned {} depths in {:.3}s", result.per_depth.len(), result.total_seconds);
    let no_timings = args.solver.no_timings || r.file.no_timings.unwrap_or(false);
    let text = pretty(&plan_json(&r, &cfg, &result, no_timings))?;
    emit(&text, r.out.as_deref())?;
    Ok(text)
}

pub fn cmd_sweep_eta(args: &SweepArgs) -> Result<String> {
    let r = resolve(&args.common)?;
    let etas = pick(args.etas.clone(), r.file.etas.clone())
        .ok_or_else(|| Error::invalid("--etas is required"))?;
    if etas.is_empty() {
        return Err(Error::invalid("--etas is empty"));
    }
    // η itself varies per record; validate the rest with a placeholder
    let cfg = solver_config(&r, &args.solver, Some(0.5))?;
    let stats = stats_for(&r)?;
    let table = r.source.table()?;
    let no_timings = args.solver.no_timings || r.file.no_timings.unwrap_or(false);
    let records: Vec<Value> = planner::eta_sweep(&stats, &table, &cfg, &etas)
        .iter()
        .map(|rec| {
            json!({
                "eta": rec.eta,
                "feasible": rec.feasible,
                "optimal_guarantee": rec.optimal_guarantee,
                "solve_time_seconds": if no_timings { 0.0 } else { rec.solve_time_seconds },
                "best": rec.best.as_ref().map(|p| plan_entry(p, no_timings)),
                "error": rec.error,
            })
        })
        .collect();
    let mut solver = serde_json::to_value(&cfg).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut solver {
        map.remove("eta");
    }
    let v = json!({
        "graph": r.source.graph_json(r.m, r.classes),
        "spec": r.source.spec_json(),
        "solver": solver,
        "records": records,
        "seed": cfg.seed,
        "version": VERSION,
    });
    let text = pretty(&v)?;
    emit(&text, r.out.as_deref())?;
    Ok(text)
}

fn parse_binning(text: &str) -> Result<Binning> {
    if text == "auto" {
        return Ok(Binning::Auto);
    }
    if let Some(w) = text.strip_prefix("width=") {
        let h: f64 = w.parse().map_err(|_| Error::invalid(format!("bad bin width '{w}'")))?;
        return Ok(Binning::Width(h));
    }
    text.parse::<usize>()
        .map(Binning::Count)
        .map_err(|_| Error::invalid(format!("--bins must be auto, a count or width=<h>, got '{text}'")))
}

pub fn cmd_probe(args: &ProbeArgs) -> Result<String> {
    let binning = parse_binning(&args.bins)?;
    let mats = args
        .paths
        .iter()
        .map(|p| {
            let mut m = matrix_io::read_matrix(p)?;
            m.label = p.display().to_string();
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    if args.transition {
        let t = entropy::entropy_transition(&mats, binning, args.collapse_fraction)?;
        text.push_str(&line(&t)?);
    } else {
        for m in &mats {
            let hist = entropy::histogram_entropy(m, binning)?;
            let (gaussian, reason) = match entropy::gaussian_bound_entropy(m) {
                Ok(e) => (Some(e), None),
                Err(e @ Error::DegenerateMatrix(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let (rows, cols) = m.shape();
            let v = json!({
                "path": m.label,
                "rows": rows,
                "cols": cols,
                "histogram": hist,
                "gaussian": gaussian,
                "gaussian_error": reason,
            });
            text.push_str(&line(&v)?);
        }
    }
    emit(&text, args.out.as_deref())?;
    Ok(text)
}

fn line<T: Serialize>(v: &T) -> Result<String> {
    // through Value so keys come out sorted like every other output
    let v = serde_json::to_value(v).map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    let mut s = out_json::to_string_line(&v).map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<String> {
    let r = resolve(&args.common)?;
    let f = &r.file;
    let Source::Graph { graph, spec } = &r.source else {
        return Err(Error::invalid("verify needs --graph; it simulates the actual operator"));
    };
    let widths = pick(args.widths.clone(), f.widths.clone())
        .ok_or_else(|| Error::invalid("--widths is required (comma-separated w_0..w_L)"))?;
    let mut cfg = McConfig::new(pick(args.samples, f.samples).unwrap_or(1000), r.seed, widths);
    let mean = pick(args.weight_mean, f.weight_mean);
    let variance = pick(args.weight_variance, f.weight_variance);
    if mean.is_some() || variance.is_some() {
        let m = WeightMoments { mean: mean.unwrap_or(0.0), variance: variance.unwrap_or(1.0) };
        cfg.weight_moments = vec![m; cfg.depth()];
    }
    if let Some(v) = pick(args.input_variance, f.input_variance) {
        cfg.input_variance = v;
    }
    cfg.validate()?;
    let report = mc::simulate(graph, spec, &cfg)?;
    if let Some(dir) = &args.dump_layers {
        mc::dump_layers(graph, spec, &cfg, dir)?;
    }
    let v = json!({
        "graph": r.source.graph_json(r.m, r.classes),
        "spec": r.source.spec_json(),
        "config": cfg,
        "completed_trials": report.completed_trials,
        "aborted_trials": report.aborted_trials,
        "layers": report.layers,
        "seed": cfg.seed,
        "version": VERSION,
    });
    let text = pretty(&v)?;
    emit(&text, r.out.as_deref())?;
    Ok(text)
}

fn log_level(cli: &Cli) -> Option<String> {
    match &cli.command {
        Command::Analyze(a) => a.common.log_level.clone(),
        Command::Plan(a) => a.common.log_level.clone(),
        Command::SweepEta(a) => a.common.log_level.clone(),
        Command::Probe(a) => a.log_level.clone(),
        Command::Verify(a) => a.common.log_level.clone(),
    }
}

/// Runs a parsed command, returning the emitted text.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Plan(a) => cmd_plan(a),
        Command::SweepEta(a) => cmd_sweep_eta(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

/// Applies `C3E_THREADS` to the global worker pool.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("C3E_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| Error::invalid(format!("C3E_THREADS={value} is not a positive integer")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Full entry point: parse, configure logging and threads, run, map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = log_level(&cli).unwrap_or_else(|| "warn".into());
    let _ = env_logger::Builder::new().parse_filters(&level).try_init();
    let outcome = configure_threads().and_then(|_| run(&cli));
    match outcome {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
