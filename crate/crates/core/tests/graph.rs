use std::collections::BTreeSet;
use std::io::Write;

use c3e::graph::{
    graph_entropy, load_graph, max_graph_entropy, parse_edge_list, parse_matrix_market, Graph,
    GraphFormat, GraphStats, LoadOptions, NodeWeightFunction,
};
use c3e::Error;
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn loads_star_fixture() {
    let g = load_graph(fixture("star4.edges"), LoadOptions::new(GraphFormat::EdgeList)).unwrap();
    assert_eq!(g.node_count(), 4);
    assert_eq!(g.edge_count(), 3);
    assert_eq!(g.degrees(), vec![3, 1, 1, 1]);
}

#[test]
fn declared_n_adds_isolated_nodes_and_rejects_overflow() {
    let opts = LoadOptions { n: Some(6), ..LoadOptions::new(GraphFormat::EdgeList) };
    let g = load_graph(fixture("star4.edges"), opts).unwrap();
    assert_eq!(g.node_count(), 6);
    let err = parse_edge_list("0 1\n1 5\n", Some(4), false).unwrap_err();
    assert!(matches!(err, Error::EndpointOutOfRange { .. }), "{err}");
}

#[test]
fn missing_file_is_io_error() {
    let err = load_graph("/nonexistent/graph.edges", LoadOptions::new(GraphFormat::EdgeList)).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn malformed_lines_report_position() {
    let err = parse_edge_list("0 1\n2 x\n", None, false).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('2'), "{msg}");
    assert!(parse_edge_list("# only comments\n", None, false).is_err());
}

#[test]
fn undirected_edges_are_canonical() {
    let g = parse_edge_list("1 0\n0 1\n2 1\n", None, false).unwrap();
    assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    let d = parse_edge_list("1 0\n0 1\n", None, true).unwrap();
    assert_eq!(d.edge_count(), 2);
}

#[test]
fn matrix_market_matches_edge_list() {
    let mm = "%%MatrixMarket matrix coordinate pattern symmetric\n% star\n4 4 3\n2 1\n3 1\n4 1\n";
    let a = parse_matrix_market(mm, None, false).unwrap();
    let b = Graph::star(4).unwrap();
    assert_eq!(a.edges(), b.edges());

    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(mm.as_bytes()).unwrap();
    let c = load_graph(f.path(), LoadOptions::new(GraphFormat::MatrixMarket)).unwrap();
    assert_eq!(c, a);
}

#[test]
fn stats_validation() {
    let s = GraphStats::new(3312, 3703, 6).unwrap();
    assert!((s.max_entropy() - 8.105_307_6).abs() < 1e-6);
    assert!(GraphStats::new(0, 4, 2).is_err());
    assert!(GraphStats::new(10, 0, 2).is_err());
}

#[test]
fn uniform_entropy_is_ln_n() {
    for n in [1usize, 2, 3, 17, 100, 999, 10_000] {
        let g = Graph::new(n, std::iter::empty(), false).unwrap();
        let h = graph_entropy(&g, &NodeWeightFunction::Uniform).unwrap();
        let expect = max_graph_entropy(n);
        assert!((h.value - expect).abs() <= 1e-12 * expect.max(1.0), "n={n}");
    }
}

#[test]
fn nonpositive_weights_rejected() {
    let g = Graph::path(3).unwrap();
    assert!(graph_entropy(&g, &NodeWeightFunction::Custom(vec![1.0, 0.0, 1.0])).is_err());
    assert!(graph_entropy(&g, &NodeWeightFunction::Custom(vec![1.0, 1.0])).is_err());
    let star = Graph::star(5).unwrap();
    let h = graph_entropy(&star, &NodeWeightFunction::Degree).unwrap();
    // p = (4,1,1,1,1)/8
    let expect = -(0.5f64 * 0.5f64.ln() + 4.0 * 0.125 * 0.125f64.ln());
    assert!((h.value - expect).abs() < 1e-14);
}

fn arb_edges() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..60).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..150)))
}

proptest! {
    #[test]
    fn edge_list_round_trip((n, edges) in arb_edges(), directed in any::<bool>()) {
        let g = Graph::new(n, edges, directed).unwrap();
        let back = parse_edge_list(&g.to_edge_list(), Some(n), directed).unwrap();
        let a: BTreeSet<_> = g.edges().iter().copied().collect();
        let b: BTreeSet<_> = back.edges().iter().copied().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn entropy_scale_invariant_and_bounded(
        w in prop::collection::vec(1e-3f64..1e3, 1..200),
        c in 1e-3f64..1e3,
    ) {
        let g = Graph::new(w.len(), std::iter::empty(), false).unwrap();
        let h = graph_entropy(&g, &NodeWeightFunction::Custom(w.clone())).unwrap().value;
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        let hc = graph_entropy(&g, &NodeWeightFunction::Custom(scaled)).unwrap().value;
        prop_assert!((h - hc).abs() <= 1e-12 * h.max(1.0));
        prop_assert!(h >= 0.0 && h <= max_graph_entropy(w.len()));
    }
}
