//! Graph loading, basic statistics and generalized graph entropy.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyEstimate, EntropyMethod};
use crate::error::{Error, Result};

/// On-disk graph formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    EdgeList,
    MatrixMarket,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-list" | "edgelist" | "edges" => Ok(GraphFormat::EdgeList),
            "matrix-market" | "mtx" | "mm" => Ok(GraphFormat::MatrixMarket),
            other => Err(Error::invalid(format!("unknown graph format '{other}'"))),
        }
    }
}

/// A simple graph on nodes `0..n`.
///
/// Undirected edges are stored once as `(min, max)`; the edge list is sorted
/// and free of duplicates. Self-loops are kept as given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    directed: bool,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut canonical = Vec::new();
        for (u, v) in edges {
            if u >= n {
                return Err(Error::EndpointOutOfRange { node: u, n });
            }
            if v >= n {
                return Err(Error::EndpointOutOfRange { node: v, n });
            }
            canonical.push(if directed { (u, v) } else { (u.min(v), u.max(v)) });
        }
        canonical.sort_unstable();
        canonical.dedup();
        Ok(Graph {
            n,
            edges: canonical,
            directed,
        })
    }

    pub fn undirected(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(n, edges, false)
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Self::undirected(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Star with node 0 as the center and `n - 1` leaves.
    pub fn star(n: usize) -> Result<Self> {
        Self::undirected(n, (1..n).map(|i| (0, i)))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn has_self_loops(&self) -> bool {
        self.edges.iter().any(|&(u, v)| u == v)
    }

    /// Degree of every node. Undirected edges count for both endpoints, a
    /// self-loop counts once; directed graphs report out-degree.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            if !self.directed && u != v {
                deg[v] += 1;
            }
        }
        deg
    }

    /// Adjacency triplets with both orientations for undirected edges.
    pub(crate) fn adjacency_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for &(u, v) in &self.edges {
            out.push((u, v, 1.0));
            if !self.directed && u != v {
                out.push((v, u, 1.0));
            }
        }
        out
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::invalid("permutation length differs from node count"));
        }
        Graph::new(
            self.n,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
            self.directed,
        )
    }

    /// Edge-list text with an `# n=<int>` header, readable by [`parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n={}\n", self.n);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

/// Options for [`load_graph`].
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub format: GraphFormat,
    /// Node count; overrides an `# n=` header. Inferred from the largest id when absent.
    pub n: Option<usize>,
    pub directed: bool,
}

impl LoadOptions {
    pub fn new(format: GraphFormat) -> Self {
        LoadOptions {
            format,
            n: None,
            directed: false,
        }
    }
}

pub fn load_graph(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    match opts.format {
        GraphFormat::EdgeList => parse_edge_list_named(&text, opts.n, opts.directed, &label),
        GraphFormat::MatrixMarket => parse_matrix_market_named(&text, opts.n, opts.directed, &label),
    }
}

/// Parses whitespace-separated `u v` pairs with 0-based ids.
pub fn parse_edge_list(text: &str, n: Option<usize>, directed: bool) -> Result<Graph> {
    parse_edge_list_named(text, n, directed, "<edge-list>")
}

fn parse_edge_list_named(text: &str, n: Option<usize>, directed: bool, label: &str) -> Result<Graph> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: label.to_string(),
        line,
        message,
    };
    let mut header_n = None;
    let mut edges = Vec::new();
    let mut saw_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        saw_content = true;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("n=") {
                let parsed = value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| parse_err(line_no, format!("bad node-count header '{line}'")))?;
                header_n = Some(parsed);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b)) = (fields.next(), fields.next()) else {
            return Err(parse_err(line_no, format!("expected 'u v', got '{line}'")));
        };
        let u = a
            .parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("bad node id '{a}'")))?;
        let v = b
            .parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("bad node id '{b}'")))?;
        edges.push((u, v));
    }
    if !saw_content {
        return Err(Error::Empty(label.to_string()));
    }
    let n = match n.or(header_n) {
        Some(n) => n,
        None => edges
            .iter()
            .map(|&(u, v)| u.max(v) + 1)
            .max()
            .ok_or_else(|| Error::Empty(label.to_string()))?,
    };
    Graph::new(n, edges, directed)
}

/// Parses a Matrix Market `coordinate` file (pattern, integer or real values;
/// general or symmetric) as an adjacency matrix. Explicit zero values are not edges.
pub fn parse_matrix_market(text: &str, n: Option<usize>, directed: bool) -> Result<Graph> {
    parse_matrix_market_named(text, n, directed, "<matrix-market>")
}

fn parse_matrix_market_named(text: &str, n: Option<usize>, directed: bool, label: &str) -> Result<Graph> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: label.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let Some((_, banner)) = lines.next() else {
        return Err(Error::Empty(label.to_string()));
    };
    if banner.trim().is_empty() {
        return Err(Error::Empty(label.to_string()));
    }
    let banner_fields: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if banner_fields.len() < 5 || banner_fields[0] != "%%matrixmarket" || banner_fields[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix banner".into()));
    }
    if banner_fields[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported layout '{}'", banner_fields[2])));
    }
    let pattern = match banner_fields[3].as_str() {
        "pattern" => true,
        "real" | "integer" | "double" => false,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    match banner_fields[4].as_str() {
        "general" | "symmetric" => {}
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut edges = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((rows, _, _)) = size else {
            if fields.len() != 3 {
                return Err(parse_err(line_no, format!("expected 'rows cols nnz', got '{line}'")));
            }
            let nums: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(line_no, format!("bad size line '{line}'")))?;
            if nums[0] != nums[1] {
                return Err(parse_err(line_no, "adjacency matrix must be square".into()));
            }
            size = Some((nums[0], nums[1], nums[2]));
            continue;
        };
        let want = if pattern { 2 } else { 3 };
        if fields.len() < want {
            return Err(parse_err(line_no, format!("expected {want} fields, got '{line}'")));
        }
        let idx = |s: &str| -> Result<usize> {
            let v = s
                .parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("bad index '{s}'")))?;
            if v == 0 {
                return Err(parse_err(line_no, "indices are 1-based".into()));
            }
            if v > rows {
                return Err(Error::EndpointOutOfRange { node: v - 1, n: rows });
            }
            Ok(v - 1)
        };
        let (r, c) = (idx(fields[0])?, idx(fields[1])?);
        if !pattern {
            let value: f64 = fields[2]
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad value '{}'", fields[2])))?;
            if value == 0.0 {
                continue;
            }
        }
        edges.push((r, c));
    }
    let Some((rows, _, _)) = size else {
        return Err(Error::Empty(label.to_string()));
    };
    Graph::new(n.unwrap_or(rows), edges, directed)
}

/// Scalar statistics the planner needs for one graph and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n: usize,
    /// Input feature dimension, `w_0`.
    pub m: usize,
    /// Output dimension, `w_L`.
    pub num_classes: usize,
    pub edge_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degrees: Vec<usize>,
}

impl GraphStats {
    pub fn new(n: usize, m: usize, num_classes: usize) -> Result<Self> {
        let stats = GraphStats {
            n,
            m,
            num_classes,
            edge_count: 0,
            degrees: Vec::new(),
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn from_graph(graph: &Graph, m: usize, num_classes: usize) -> Result<Self> {
        let stats = GraphStats {
            n: graph.node_count(),
            m,
            num_classes,
            edge_count: graph.edge_count(),
            degrees: graph.degrees(),
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("node count must be positive"));
        }
        if self.m < 2 {
            return Err(Error::invalid(format!("feature dimension m={} must be at least 2", self.m)));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid(format!(
                "class count {} must be at least 2",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// `ln n`, the largest possible graph entropy.
    pub fn max_entropy(&self) -> f64 {
        max_graph_entropy(self.n)
    }
}

/// Node property `g(v)` feeding the generalized graph entropy.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeWeightFunction {
    Uniform,
    Degree,
    Custom(Vec<f64>),
}

impl NodeWeightFunction {
    fn weights(&self, graph: &Graph) -> Result<Vec<f64>> {
        let n = graph.node_count();
        let w: Vec<f64> = match self {
            NodeWeightFunction::Uniform => vec![1.0; n],
            NodeWeightFunction::Degree => graph.degrees().into_iter().map(|d| d as f64).collect(),
            NodeWeightFunction::Custom(values) => {
                if values.len() != n {
                    return Err(Error::invalid(format!(
                        "weight vector has length {} but graph has {n} nodes",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!("node weight g(v_{i}) = {v} is not positive")));
        }
        Ok(w)
    }
}

/// `H(G) = -Σ p_i ln p_i` with `p_i = g(v_i) / Σ_j g(v_j)`, in nats.
pub fn graph_entropy(graph: &Graph, weights: &NodeWeightFunction) -> Result<EntropyEstimate> {
    let w = weights.weights(graph)?;
    let n = w.len();
    let total: f64 = w.iter().sum();
    // ln S - Σ g ln g / S avoids forming the p_i explicitly
    let weighted_log: f64 = w.iter().map(|&g| g * g.ln()).sum();
    let bound = max_graph_entropy(n);
    let value = (total.ln() - weighted_log / total).clamp(0.0, bound);
    Ok(EntropyEstimate {
        value,
        method: EntropyMethod::GraphEntropy,
        support_size: Some(n),
        bins: None,
        bound,
    })
}

/// `ln n`.
pub fn max_graph_entropy(n: usize) -> f64 {
    assert!(n >= 1, "node count must be positive");
    (n as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_basic() {
        let g = parse_edge_list("0 1\n1 2", Some(3), false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn edge_list_out_of_range() {
        let err = parse_edge_list("0 5", Some(3), false).unwrap_err();
        assert!(matches!(err, Error::EndpointOutOfRange { node: 5, n: 3 }));
    }

    #[test]
    fn edge_list_header_comments_and_duplicates() {
        let g = parse_edge_list("# n=5\n# comment\n1 0\n0 1\n\n3 3\n", None, false).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edges(), &[(0, 1), (3, 3)]);
        assert!(g.has_self_loops());
        // the flag wins over the header
        assert_eq!(parse_edge_list("# n=5\n0 1\n", Some(7), false).unwrap().node_count(), 7);
    }

    #[test]
    fn edge_list_malformed_line_reports_line_number() {
        let err = parse_edge_list("0 1\n1 x\n", None, false).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_edge_list("0 1\n2\n", None, false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn edge_list_empty() {
        assert!(matches!(parse_edge_list("", None, false), Err(Error::Empty(_))));
        assert!(matches!(parse_edge_list("\n  \n", None, false), Err(Error::Empty(_))));
        // comments only and no node count
        assert!(matches!(parse_edge_list("# hi\n", None, false), Err(Error::Empty(_))));
    }

    #[test]
    fn isolated_nodes_allowed() {
        let g = parse_edge_list("# n=4\n0 1\n", None, false).unwrap();
        assert_eq!(g.degrees(), vec![1, 1, 0, 0]);
    }

    #[test]
    fn directed_keeps_orientation() {
        let g = parse_edge_list("1 0\n0 1\n", None, true).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
        assert_eq!(g.degrees(), vec![1, 1]);
    }

    #[test]
    fn matrix_market_identity_pattern() {
        let text = "%%MatrixMarket matrix coordinate pattern general\n% c\n2 2 2\n1 1\n2 2\n";
        let g = parse_matrix_market(text, None, false).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), &[(0, 0), (1, 1)]);
    }

    #[test]
    fn matrix_market_real_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n2 1 0.5\n3 2 1.0\n3 1 0\n";
        let g = parse_matrix_market(text, None, false).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn matrix_market_errors() {
        assert!(matches!(parse_matrix_market("", None, false), Err(Error::Empty(_))));
        let bad = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n3 1\n";
        assert!(matches!(
            parse_matrix_market(bad, None, false),
            Err(Error::EndpointOutOfRange { node: 2, n: 2 })
        ));
        let bad = "%%MatrixMarket matrix array real general\n2 2\n";
        assert!(matches!(parse_matrix_market(bad, None, false), Err(Error::Parse { line: 1, .. })));
        let bad = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 x\n";
        assert!(matches!(parse_matrix_market(bad, None, false), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn stats_invariants() {
        assert!(GraphStats::new(10, 1, 3).is_err());
        assert!(GraphStats::new(10, 3, 1).is_err());
        assert!(GraphStats::new(0, 3, 3).is_err());
        let g = Graph::star(4).unwrap();
        let s = GraphStats::from_graph(&g, 8, 2).unwrap();
        assert_eq!(s.edge_count, 3);
        assert_eq!(s.degrees, vec![3, 1, 1, 1]);
    }

    #[test]
    fn entropy_uniform_and_single_node() {
        let g = Graph::undirected(8, []).unwrap();
        let h = graph_entropy(&g, &NodeWeightFunction::Uniform).unwrap();
        assert!((h.value - 8f64.ln()).abs() < 1e-15);
        assert!((h.value - 2.07944).abs() < 1e-5);
        let g1 = Graph::undirected(1, []).unwrap();
        let h1 = graph_entropy(&g1, &NodeWeightFunction::Custom(vec![3.5])).unwrap();
        assert_eq!(h1.value, 0.0);
    }

    #[test]
    fn entropy_star_degree_weights_hand_summed() {
        // p = (3/6, 1/6, 1/6, 1/6)
        let expected = -(0.5 * 0.5f64.ln() + 3.0 * (1.0 / 6.0) * (1.0f64 / 6.0).ln());
        let g = Graph::star(4).unwrap();
        let h = graph_entropy(&g, &NodeWeightFunction::Degree).unwrap();
        assert!((h.value - expected).abs() < 1e-14, "{} vs {expected}", h.value);
        assert!((h.value - 1.242_453_324_894_000_2).abs() < 1e-14);
    }

    #[test]
    fn entropy_rejects_nonpositive_weights() {
        let g = Graph::undirected(3, [(0, 1)]).unwrap();
        // node 2 is isolated so its degree weight is zero
        assert!(graph_entropy(&g, &NodeWeightFunction::Degree).is_err());
        assert!(graph_entropy(&g, &NodeWeightFunction::Custom(vec![1.0, -1.0, 2.0])).is_err());
        assert!(graph_entropy(&g, &NodeWeightFunction::Custom(vec![1.0])).is_err());
    }

    #[test]
    fn max_entropy_values() {
        assert_eq!(max_graph_entropy(1), 0.0);
        // mpmath at 30 digits
        assert!((max_graph_entropy(3312) - 8.105_307_515_505_15).abs() < 1e-13);
        assert!((max_graph_entropy(2708) - 7.903_965_634_032_166).abs() < 1e-13);
    }
}
