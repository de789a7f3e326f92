use facegcn_core::graph::{normalize_adjacency, partition, PartitionStrategy, SpatialGraph};
use facegcn_core::landmarks::geodesic_path;
use facegcn_core::mesh::{build_edge_graph, grid_mesh, read_obj, write_obj_to};
use facegcn_core::nn::{graph_conv, GraphConvParams, SgdConfig, Tensor3};
use facegcn_core::patch::KdIndex;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = SpatialGraph> {
    (1usize..=10).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut g = SpatialGraph::new(n);
            let mut it = bits.into_iter();
            for a in 0..n {
                for b in a + 1..n {
                    if it.next().unwrap() {
                        g.add_edge(a, b).unwrap();
                    }
                }
            }
            g
        })
    })
}

fn partition_strategy() -> impl Strategy<Value = PartitionStrategy> {
    prop_oneof![Just(PartitionStrategy::Uniform), Just(PartitionStrategy::Distance)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_sorted_scan(
        pts in proptest::collection::vec([-10i32..10, -10i32..10, -10i32..10], 1..150),
        q in [-12i32..12, -12i32..12, -12i32..12],
        k in 1usize..30,
    ) {
        // integer coordinates make ties common
        let pts: Vec<[f64; 3]> = pts.iter().map(|p| p.map(f64::from)).collect();
        let q = q.map(f64::from);
        let index = KdIndex::build(&pts).unwrap();
        let mut got = index.k_nearest(&q, k);
        let mut order: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut want: Vec<usize> = order.into_iter().take(k).map(|x| x.1).collect();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn masks_partition_self_loops_and_edges(g in graph_strategy(), s in partition_strategy()) {
        let labels = partition(&g, s);
        let n = g.nodes();
        for i in 0..n {
            for j in 0..n {
                let hits: f64 = (0..labels.partitions()).map(|p| labels.mask(p)[i * n + j]).sum();
                let want = if i == j || g.has_edge(i, j) { 1.0 } else { 0.0 };
                prop_assert_eq!(hits, want);
            }
        }
    }

    #[test]
    fn normalized_rows_are_bounded(g in graph_strategy(), s in partition_strategy()) {
        let labels = partition(&g, s);
        let norm = normalize_adjacency(&g, &labels);
        let n = g.nodes();
        for p in 0..norm.partitions() {
            for i in 0..n {
                for j in 0..n {
                    let v = norm.get(p, i, j);
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn graph_conv_is_linear_in_input(
        g in graph_strategy(),
        a in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels = partition(&g, PartitionStrategy::Distance);
        let norm = normalize_adjacency(&g, &labels);
        let n = g.nodes();
        let mut params = GraphConvParams::<f64>::zeros(2, 3, 2, false);
        params.weight.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let mut draw = || Tensor3::from_vec(2, n, 3, (0..6 * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (x, y) = (draw(), draw());
        let mut mix = x.clone();
        mix.data.iter_mut().zip(&y.data).for_each(|(u, v)| *u = a * *u + v);
        let fx = graph_conv(&x, &params, &norm).unwrap();
        let fy = graph_conv(&y, &params, &norm).unwrap();
        let fm = graph_conv(&mix, &params, &norm).unwrap();
        for ((m, u), v) in fm.data.iter().zip(&fx.data).zip(&fy.data) {
            prop_assert!((m - (a * u + v)).abs() <= 1e-12);
        }
    }

    #[test]
    fn node_permutation_inverts(n in 1usize..10, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let x = Tensor3::from_vec(2, n, 2, (0..4 * n).map(|i| i as f64).collect()).unwrap();
        prop_assert_eq!(x.permute_nodes(&perm).permute_nodes(&inv), x);
    }

    #[test]
    fn obj_round_trip(coords in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 27)) {
        let mut m = grid_mesh(3, 3, 1.0);
        for (v, c) in m.vertices.iter_mut().zip(coords.chunks(3)) {
            *v = [c[0], c[1], c[2]];
        }
        let mut buf = Vec::new();
        write_obj_to(&m, &mut buf).unwrap();
        prop_assert_eq!(read_obj(std::str::from_utf8(&buf).unwrap()).unwrap(), m);
    }

    #[test]
    fn geodesic_length_is_symmetric(nx in 2usize..9, ny in 2usize..9, a in any::<usize>(), b in any::<usize>(), z in proptest::collection::vec(-1.0f64..1.0, 64)) {
        let mut m = grid_mesh(nx, ny, 0.5);
        for (v, dz) in m.vertices.iter_mut().zip(&z) {
            v[2] = *dz;
        }
        let g = build_edge_graph(&m).unwrap();
        let (a, b) = (a % (nx * ny), b % (nx * ny));
        let ab = geodesic_path(&g, a, b).unwrap();
        let ba = geodesic_path(&g, b, a).unwrap();
        prop_assert_eq!(ab.total_length(), ba.total_length());
        prop_assert_eq!(ab.vertices.first().copied(), Some(a));
        prop_assert_eq!(ab.vertices.last().copied(), Some(b));
    }

    #[test]
    fn learning_rate_never_increases(mut decay in proptest::collection::vec(0usize..100, 0..5), gamma in 0.01f64..1.0) {
        decay.sort_unstable();
        let cfg = SgdConfig { decay_epochs: decay, gamma, ..SgdConfig::default() };
        for e in 1..120 {
            prop_assert!(cfg.lr_at(e) <= cfg.lr_at(e - 1));
        }
    }
}
