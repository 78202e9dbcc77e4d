use graph_kalman::poly::reduce_mod_minimal;
use graph_kalman::{
    apply_filter, eval_filter, lagrange_interpolate, Graph, GraphShift, Polynomial, ShiftKind, SpectralContext,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn coeffs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 1..=max_len)
}

/// Random connected-ish weighted graph: a path plus optional chords.
fn shift() -> impl Strategy<Value = GraphShift> {
    (4usize..=10, any::<bool>()).prop_flat_map(|(n, laplacian)| {
        let pairs = n * (n - 1) / 2;
        (
            prop::collection::vec(prop::option::weighted(0.4, 0.5..2.0f64), pairs),
            prop::collection::vec(0.5..2.0f64, n - 1),
        )
            .prop_map(move |(chords, path)| {
                let mut edges: Vec<(usize, usize, f64)> =
                    path.iter().enumerate().map(|(i, &w)| (i, i + 1, w)).collect();
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if let (Some(w), false) = (chords[k], j == i + 1) {
                            edges.push((i, j, w));
                        }
                        k += 1;
                    }
                }
                let graph = Graph::from_edges(n, edges).unwrap();
                let kind = if laplacian { ShiftKind::Laplacian } else { ShiftKind::Adjacency };
                let raw = GraphShift::build(&graph, kind).unwrap();
                let scale = raw.matrix().row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
                GraphShift::custom(&graph, raw.matrix() / scale).unwrap()
            })
    })
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frequency_response_is_a_homomorphism(s in shift(), f in coeffs(7), g in coeffs(7)) {
        let ctx = SpectralContext::new(&s).unwrap();
        let d = ctx.decomposition();
        let (f, g) = (Polynomial::new(f), Polynomial::new(g));
        let (ef, eg) = (eval_filter(&f, d).into_matrix(), eval_filter(&g, d).into_matrix());
        prop_assert!(rel(&eval_filter(&(&f + &g), d).into_matrix(), &(&ef + &eg)) <= 1e-8);
        prop_assert!(rel(&eval_filter(&(&f * &g), d).into_matrix(), &(&ef * &eg)) <= 1e-8);
    }

    #[test]
    fn reduction_preserves_the_filter(s in shift(), f in coeffs(13)) {
        let ctx = SpectralContext::new(&s).unwrap();
        let f = Polynomial::new(f);
        let r = reduce_mod_minimal(&f, ctx.minimal_polynomial()).unwrap();
        prop_assert!(r.degree() < ctx.spectrum().len() || r.is_zero());
        let d = ctx.decomposition();
        prop_assert!(rel(&eval_filter(&f, d).into_matrix(), &eval_filter(&r, d).into_matrix()) <= 1e-7);
    }

    #[test]
    fn vertex_and_spectral_filtering_agree(s in shift(), h in coeffs(7), seed in any::<u64>()) {
        let ctx = SpectralContext::new(&s).unwrap();
        let mut rng = graph_kalman::rng::seeded(seed);
        let x = graph_kalman::rng::standard_normal(&mut rng, ctx.order());
        let h = Polynomial::new(h);
        let direct = apply_filter(&h, &s, &x).unwrap();
        let dense: DVector<f64> = eval_filter(&h, ctx.decomposition()).into_matrix() * &x;
        prop_assert!((&direct - &dense).norm() <= 1e-9 * dense.norm().max(1.0));
    }

    #[test]
    fn interpolation_hits_the_nodes(ys in prop::collection::vec(-5.0..5.0f64, 1..=12)) {
        let nodes: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (-1.0 + 2.0 * i as f64 / 11.0, y)).collect();
        let p = lagrange_interpolate(&nodes).unwrap();
        let scale = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        for (x, y) in nodes {
            prop_assert!((p.eval(x) - y).abs() <= 1e-7 * scale.max(1e-300));
        }
    }

    #[test]
    fn membership_holds_for_filters(s in shift(), h in coeffs(5)) {
        let ctx = SpectralContext::new(&s).unwrap();
        let m = eval_filter(&Polynomial::new(h), ctx.decomposition()).into_matrix();
        let verdict = graph_kalman::is_polynomial_filter(&m, ctx.decomposition(), ctx.spectrum(), None).unwrap();
        prop_assert!(verdict.is_member);
    }
}
