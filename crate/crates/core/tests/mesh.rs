mod common;

use std::collections::BTreeSet;

use flowsurrogate::harness::{synth_sample, SynthConfig};
use flowsurrogate::mesh::{
    geodesic_distances, knn_euclidean, parse_obj, parse_pat, subsample, write_obj, write_pat, Mesh, MeshGraph,
};
use flowsurrogate::scalar::vec3;
use proptest::prelude::*;

fn small_plate(vertices: usize, seed: u64) -> Mesh<f64> {
    let cfg = SynthConfig { min_vertices: vertices, max_vertices: vertices, seed, ..Default::default() };
    synth_sample(&cfg, 0).unwrap().mesh
}

#[test]
fn obj_roundtrip_of_generated_plate_is_bit_identical() {
    let mesh = small_plate(3000, 11);
    let mut buf = Vec::new();
    write_obj(&mesh, &mut buf).unwrap();
    let back: Mesh<f64> = parse_obj(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.faces(), mesh.faces());
    for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }
}

#[test]
fn pat_roundtrip_keeps_counts() {
    let mesh = small_plate(1000, 3);
    let mut buf = Vec::new();
    write_pat(&mesh, &mut buf).unwrap();
    let back = parse_pat::<f64>(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.mesh.vertex_count(), mesh.vertex_count());
    assert_eq!(back.mesh.face_count(), mesh.face_count());
    assert_eq!(back.mesh.vertices(), mesh.vertices());
    assert_eq!(back.node_ids(), (1..=mesh.vertex_count() as u64).collect::<Vec<_>>());
}

#[test]
fn edge_count_matches_pair_scan() {
    let mesh = small_plate(2000, 5);
    let graph = MeshGraph::build(&mesh);
    let mut pairs = BTreeSet::new();
    for f in mesh.faces() {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])] {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    assert_eq!(graph.edge_count(), pairs.len());
    let listed: BTreeSet<(usize, usize)> = graph.edges().map(|(a, b, _)| (a, b)).collect();
    assert_eq!(listed, pairs);
}

#[test]
fn edge_weights_are_bit_exact_lengths() {
    let mesh = common::random_grid_mesh(9, 7, 2);
    let vs = mesh.vertices();
    for (a, b, w) in MeshGraph::build(&mesh).edges() {
        assert_eq!(w.to_bits(), vec3::dist(vs[a], vs[b]).to_bits());
    }
}

#[test]
fn dijkstra_equals_floyd_warshall_on_fifty_vertices() {
    let mesh = common::random_grid_mesh(10, 5, 50);
    let graph = MeshGraph::build(&mesh);
    let fw = common::floyd_warshall(&graph);
    for s in 0..mesh.vertex_count() {
        assert_eq!(geodesic_distances(&graph, s).unwrap(), fw[s]);
    }
}

#[test]
fn knn_on_two_hundred_points_matches_full_sort() {
    let mesh = common::random_grid_mesh(20, 10, 9);
    let vs = mesh.vertices();
    for q in [0, 57, 199] {
        let mut all: Vec<usize> = (0..vs.len()).collect();
        all.sort_by(|&a, &b| vec3::dist_sq(vs[q], vs[a]).total_cmp(&vec3::dist_sq(vs[q], vs[b])).then(a.cmp(&b)));
        all.truncate(100);
        let mut got = knn_euclidean(&mesh, q, 100).unwrap();
        got.sort_unstable();
        all.sort_unstable();
        assert_eq!(got, all);
    }
}

#[test]
fn different_seeds_give_different_subsamples() {
    let mesh = small_plate(1000, 1);
    let a = subsample(&mesh, 0.125, 1).unwrap();
    assert_eq!(a, subsample(&mesh, 0.125, 1).unwrap());
    assert_ne!(a, subsample(&mesh, 0.125, 2).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dijkstra_matches_floyd_warshall(nx in 2usize..11, ny in 2usize..10, seed in any::<u64>()) {
        let mesh = common::random_grid_mesh(nx, ny, seed);
        let graph = MeshGraph::build(&mesh);
        let fw = common::floyd_warshall(&graph);
        for s in 0..mesh.vertex_count() {
            prop_assert_eq!(geodesic_distances(&graph, s).unwrap(), fw[s].clone());
        }
    }

    #[test]
    fn geodesics_obey_triangle_inequality_and_bound_chords(seed in any::<u64>(), picks in prop::collection::vec((0usize..80, 0usize..80, 0usize..80), 20)) {
        let mesh = common::random_grid_mesh(10, 8, seed);
        let graph = MeshGraph::build(&mesh);
        let rows: Vec<Vec<f64>> = (0..80).map(|s| geodesic_distances(&graph, s).unwrap()).collect();
        let vs = mesh.vertices();
        for (u, v, w) in picks {
            prop_assert!(rows[u][w] <= rows[u][v] + rows[v][w] + 1e-12 * rows[u][w].max(1.0));
            prop_assert!(rows[u][v] >= vec3::dist(vs[u], vs[v]) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn subsample_is_distinct_and_in_range(seed in any::<u64>(), fraction in 0.01f64..=1.0) {
        let mesh = common::random_grid_mesh(9, 9, 4);
        let ids = subsample(&mesh, fraction, seed).unwrap();
        prop_assert_eq!(ids.len(), (81.0 * fraction).floor() as usize);
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(ids.iter().all(|&i| i < 81));
    }
}
