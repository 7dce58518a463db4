use std::io::Cursor;
use std::path::Path;

use mhksc_core::graph::{read_edge_list, Graph};
use proptest::prelude::*;

fn parse(text: &str) -> Graph {
    read_edge_list(Cursor::new(text.as_bytes()), Path::new("<mem>")).unwrap()
}

fn edge_list() -> impl Strategy<Value = Vec<(u16, u16)>> {
    prop::collection::vec((0u16..60, 0u16..60), 1..200)
}

proptest! {
    #[test]
    fn round_trip_preserves_graph(edges in edge_list()) {
        let text: String = edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect();
        prop_assume!(edges.iter().any(|(u, v)| u != v));
        let g = parse(&text);
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        let h = read_edge_list(Cursor::new(out), Path::new("<mem>")).unwrap();
        prop_assert_eq!(&g, &h);
    }

    #[test]
    fn degree_sum_is_twice_edges(edges in edge_list()) {
        prop_assume!(edges.iter().any(|(u, v)| u != v));
        let text: String = edges.iter().map(|(u, v)| format!("{u}\t{v}\n")).collect();
        let g = parse(&text);
        let total: usize = (0..g.n_nodes()).map(|u| g.degree(u)).sum();
        prop_assert_eq!(total, 2 * g.n_edges());
        for u in 0..g.n_nodes() {
            let nb = g.neighbors(u);
            prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!nb.contains(&u));
            for &v in nb {
                prop_assert!(g.neighbors(v).binary_search(&u).is_ok());
            }
        }
    }

    #[test]
    fn line_order_does_not_change_edge_set(edges in edge_list(), seed in any::<u64>()) {
        prop_assume!(edges.iter().any(|(u, v)| u != v));
        let text: String = edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect();
        let mut shuffled = edges.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let text2: String = shuffled.iter().map(|(u, v)| format!("{v} {u}\n")).collect();
        let (a, b) = (parse(&text), parse(&text2));
        let canon = |g: &Graph| {
            let mut e: Vec<(String, String)> = g
                .edges()
                .map(|(u, v)| {
                    let (x, y) = (g.label(u), g.label(v));
                    if x < y { (x, y) } else { (y, x) }
                })
                .collect();
            e.sort();
            e
        };
        prop_assert_eq!(canon(&a), canon(&b));
        prop_assert_eq!(a.n_edges(), b.n_edges());
    }
}

#[test]
fn clustering_coefficient_of_small_graphs() {
    let triangle = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    assert!((triangle.global_clustering_coefficient() - 1.0).abs() < 1e-15);
    let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    assert_eq!(path.global_clustering_coefficient(), 0.0);
    // Triangle with a pendant: local values 1, 1, 1/3 and 0.
    let paw = Graph::from_edges(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
    assert!((paw.global_clustering_coefficient() - 7.0 / 12.0).abs() < 1e-15);
}

/// Public SNAP ego-Facebook network: 4039 nodes, 88234 edges, clustering
/// coefficient about 0.6055. Point `MHKSC_FACEBOOK_EDGES` at the file.
#[test]
#[ignore]
fn facebook_network_statistics() {
    let path = std::env::var("MHKSC_FACEBOOK_EDGES").expect("set MHKSC_FACEBOOK_EDGES");
    let g = mhksc_core::graph::load_edge_list(Path::new(&path)).unwrap();
    assert_eq!(g.n_nodes(), 4039);
    assert_eq!(g.n_edges(), 88234);
    assert!((g.global_clustering_coefficient() - 0.6055).abs() < 5e-4);
}
