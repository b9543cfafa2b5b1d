//! C ABI over the `c3e` crate.
//!
//! Every function returns a [`C3eStatus`]; results come back through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`c3e_last_error`]. Strings handed out by the library must be released
//! with [`c3e_string_free`], graphs with [`c3e_graph_free`].
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the stated length; string
//! arguments must be NUL-terminated. Handles and strings must come from this
//! library and be freed at most once.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use c3e::capacity::{self, Regime, WidthProfile};
use c3e::graph::{self, Graph, GraphFormat, GraphStats, LoadOptions, NodeWeightFunction};
use c3e::planner::{self, SolverConfig, VarianceTable};
use c3e::propagation::{self, LayerVariances, PropagationSpec};
use c3e::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C3eStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Degenerate = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C3eGraphFormat {
    EdgeList = 0,
    MatrixMarket = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C3eNodeWeight {
    Uniform = 0,
    Degree = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C3eRegime {
    Wide = 0,
    Narrow = 1,
}

/// Opaque graph handle.
pub struct C3eGraph(Graph);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(C3eStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => C3eStatus::Io,
            e if e.is_degenerate() => C3eStatus::Degenerate,
            _ => C3eStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(C3eStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(C3eStatus::InvalidInput, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> C3eStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            C3eStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            C3eStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn graph_arg<'a>(g: *const C3eGraph) -> Result<&'a Graph, Failure> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null("graph"))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| invalid("output contains a NUL byte"))
}

fn parse_spec(json: Option<&str>) -> Result<PropagationSpec, Failure> {
    match json {
        None => Ok(PropagationSpec::gcn()),
        Some(text) => {
            let spec: PropagationSpec =
                serde_json::from_str(text).map_err(|e| invalid(format!("propagation spec: {e}")))?;
            spec.validate()?;
            Ok(spec)
        }
    }
}

fn parse_config(json: &str) -> Result<SolverConfig, Failure> {
    let cfg: SolverConfig = serde_json::from_str(json).map_err(|e| invalid(format!("solver config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn whole(x: f64, what: &str) -> Result<usize, Failure> {
    if x.is_finite() && x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(invalid(format!("{what} = {x} must be a positive integer")))
    }
}

/// Builds stats, variances and profile from `widths[0..=L]` and `sigma2[0..L]`.
unsafe fn channel_args(
    n: usize,
    widths: *const f64,
    depth: usize,
    sigma2: *const f64,
) -> Result<(GraphStats, LayerVariances, WidthProfile), Failure> {
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    let w = slice_arg(widths, depth + 1, "widths")?;
    let s = slice_arg(sigma2, depth, "sigma2")?;
    let stats = GraphStats::new(n, whole(w[0], "w_0")?, whole(w[depth], "w_L")?)?;
    let vars = LayerVariances::new(n, s.to_vec())?;
    let prof = WidthProfile::new(w.to_vec())?;
    Ok((stats, vars, prof))
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library and valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn c3e_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn c3e_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a graph file. `n` = 0 infers the node count.
#[no_mangle]
pub unsafe extern "C" fn c3e_graph_load(
    path: *const c_char,
    format: C3eGraphFormat,
    n: usize,
    directed: bool,
    out: *mut *mut C3eGraph,
) -> C3eStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let mut opts = LoadOptions::new(match format {
            C3eGraphFormat::EdgeList => GraphFormat::EdgeList,
            C3eGraphFormat::MatrixMarket => GraphFormat::MatrixMarket,
        });
        opts.n = (n > 0).then_some(n);
        opts.directed = directed;
        let g = graph::load_graph(path, opts)?;
        *out = Box::into_raw(Box::new(C3eGraph(g)));
        Ok(())
    })
}

/// Builds a graph from `len` edges `(src[i], dst[i])` on nodes `0..n`.
#[no_mangle]
pub unsafe extern "C" fn c3e_graph_from_edges(
    n: usize,
    src: *const usize,
    dst: *const usize,
    len: usize,
    directed: bool,
    out: *mut *mut C3eGraph,
) -> C3eStatus {
    guard(|| {
        let src = slice_arg(src, len, "src")?;
        let dst = slice_arg(dst, len, "dst")?;
        let out = out_arg(out, "out")?;
        let g = Graph::new(n, src.iter().copied().zip(dst.iter().copied()), directed)?;
        *out = Box::into_raw(Box::new(C3eGraph(g)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn c3e_graph_free(g: *mut C3eGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

#[no_mangle]
pub unsafe extern "C" fn c3e_graph_node_count(g: *const C3eGraph, out: *mut usize) -> C3eStatus {
    guard(|| {
        *out_arg(out, "out")? = graph_arg(g)?.node_count();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn c3e_graph_edge_count(g: *const C3eGraph, out: *mut usize) -> C3eStatus {
    guard(|| {
        *out_arg(out, "out")? = graph_arg(g)?.edge_count();
        Ok(())
    })
}

/// Generalized graph entropy in nats.
#[no_mangle]
pub unsafe extern "C" fn c3e_graph_entropy(g: *const C3eGraph, weight: C3eNodeWeight, out: *mut f64) -> C3eStatus {
    guard(|| {
        let w = match weight {
            C3eNodeWeight::Uniform => NodeWeightFunction::Uniform,
            C3eNodeWeight::Degree => NodeWeightFunction::Degree,
        };
        *out_arg(out, "out")? = graph::graph_entropy(graph_arg(g)?, &w)?.value;
        Ok(())
    })
}

/// Writes the `depth` per-layer operator variances into `out`. A null
/// `spec_json` selects the GCN operator.
#[no_mangle]
pub unsafe extern "C" fn c3e_layer_variances(
    g: *const C3eGraph,
    spec_json: *const c_char,
    depth: usize,
    out: *mut f64,
) -> C3eStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let spec = parse_spec(opt_str_arg(spec_json, "spec_json")?)?;
        if depth == 0 {
            return Err(invalid("depth must be at least 1"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let vars = propagation::layer_variances(g, &spec, depth)?;
        std::slice::from_raw_parts_mut(out, depth).copy_from_slice(vars.sigma2());
        Ok(())
    })
}

/// φ for widths `w_0..w_depth` and variances `σ²_1..σ²_depth`.
#[no_mangle]
pub unsafe extern "C" fn c3e_channel_capacity(
    n: usize,
    widths: *const f64,
    depth: usize,
    sigma2: *const f64,
    out: *mut f64,
) -> C3eStatus {
    guard(|| {
        let (stats, vars, prof) = channel_args(n, widths, depth, sigma2)?;
        *out_arg(out, "out")? = capacity::channel_capacity(&stats, &vars, &prof)?;
        Ok(())
    })
}

/// Compression ratio θ = φ / w̄.
#[no_mangle]
pub unsafe extern "C" fn c3e_compression_ratio(
    n: usize,
    widths: *const f64,
    depth: usize,
    sigma2: *const f64,
    out: *mut f64,
) -> C3eStatus {
    guard(|| {
        let (stats, vars, prof) = channel_args(n, widths, depth, sigma2)?;
        let phi = capacity::channel_capacity(&stats, &vars, &prof)?;
        *out_arg(out, "out")? = capacity::compression_ratio(phi, &prof);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn c3e_width_threshold(
    n: usize,
    widths: *const f64,
    depth: usize,
    sigma2: *const f64,
    out: *mut f64,
) -> C3eStatus {
    guard(|| {
        let (stats, vars, prof) = channel_args(n, widths, depth, sigma2)?;
        *out_arg(out, "out")? = capacity::width_threshold(&stats, &vars, &prof)?;
        Ok(())
    })
}

/// Effective capacity φ₀. `per_layer` may be null; otherwise it receives
/// `depth` contributions.
#[no_mangle]
pub unsafe extern "C" fn c3e_effective_capacity(
    n: usize,
    widths: *const f64,
    depth: usize,
    sigma2: *const f64,
    out: *mut f64,
    per_layer: *mut f64,
) -> C3eStatus {
    guard(|| {
        let (stats, vars, prof) = channel_args(n, widths, depth, sigma2)?;
        let out = out_arg(out, "out")?;
        let eff = capacity::effective_capacity(&stats, &vars, &prof)?;
        *out = eff.phi0;
        if !per_layer.is_null() {
            let dst = std::slice::from_raw_parts_mut(per_layer, depth);
            for (d, t) in dst.iter_mut().zip(&eff.per_layer) {
                *d = t.phi0_contribution;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn c3e_depth_regime(
    n: usize,
    widths: *const f64,
    depth: usize,
    sigma2: *const f64,
    out: *mut C3eRegime,
) -> C3eStatus {
    guard(|| {
        let (_, vars, prof) = channel_args(n, widths, depth, sigma2)?;
        *out_arg(out, "out")? = match capacity::depth_regime(&vars, &prof)? {
            Regime::Wide => C3eRegime::Wide,
            Regime::Narrow => C3eRegime::Narrow,
        };
        Ok(())
    })
}

/// Plans widths and depth for graph statistics with a constant operator
/// variance. `config_json` is a solver configuration object (`eta` required).
/// The plan comes back as JSON in `*out`; free it with [`c3e_string_free`].
#[no_mangle]
pub unsafe extern "C" fn c3e_plan_json(
    n: usize,
    sigma2: f64,
    m: usize,
    num_classes: usize,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> C3eStatus {
    guard(|| {
        let cfg = parse_config(str_arg(config_json, "config_json")?)?;
        let out = out_arg(out, "out")?;
        let stats = GraphStats::new(n, m, num_classes)?;
        let table = VarianceTable::constant(n, sigma2)?;
        let result = planner::plan(&stats, &table, &cfg)?;
        *out = into_c_string(to_json(&result)?)?;
        Ok(())
    })
}

/// As [`c3e_plan_json`], with variances taken from the graph's operators.
#[no_mangle]
pub unsafe extern "C" fn c3e_plan_graph_json(
    g: *const C3eGraph,
    m: usize,
    num_classes: usize,
    spec_json: *const c_char,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> C3eStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let spec = parse_spec(opt_str_arg(spec_json, "spec_json")?)?;
        let cfg = parse_config(str_arg(config_json, "config_json")?)?;
        let out = out_arg(out, "out")?;
        let result = planner::plan_for_graph(g, m, num_classes, &spec, &cfg)?;
        *out = into_c_string(to_json(&result)?)?;
        Ok(())
    })
}

fn to_json(v: &planner::PlanResult) -> Result<String, Failure> {
    c3e::json::to_string_pretty(v).map_err(|e| invalid(format!("serialization failed: {e}")))
}
