use proptest::prelude::*;
use pyrewire::graph::{WeightMode, WeightedGraph};
use pyrewire::linalg::{singular_values, svd, sym_eig};
use pyrewire::DenseMatrix;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| DenseMatrix::new(rows, cols, v).unwrap())
}

fn gram_trace(m: &DenseMatrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs_and_is_orthonormal(m in (1usize..7, 1usize..7).prop_flat_map(|(r, c)| matrix(r, c))) {
        let s = svd(&m).unwrap();
        prop_assert!(s.reconstruct().sub(&m).unwrap().max_abs() < 1e-10);
        let utu = s.u.transpose().matmul(&s.u).unwrap();
        let k = utu.rows();
        prop_assert!(utu.sub(&DenseMatrix::identity(k)).unwrap().max_abs() < 1e-10);
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        // Σσ² is the squared Frobenius norm
        let energy: f64 = s.sigma.iter().map(|x| x * x).sum();
        prop_assert!((energy - gram_trace(&m)).abs() <= 1e-9 * (1.0 + energy));
    }

    #[test]
    fn eigenpairs_satisfy_the_definition(v in matrix(6, 6)) {
        let a = v.add(&v.transpose()).unwrap();
        let e = sym_eig(&a).unwrap();
        for (k, lambda) in e.values.iter().enumerate() {
            let x = e.vectors.column(k);
            let ax = a.matvec(&x).unwrap();
            for (p, q) in ax.iter().zip(&x) {
                prop_assert!((p - lambda * q).abs() < 1e-9);
            }
        }
        let trace: f64 = (0..6).map(|i| a[(i, i)]).sum();
        prop_assert!((e.values.iter().sum::<f64>() - trace).abs() < 1e-9);
    }

    #[test]
    fn laplacian_spectrum_is_nonnegative(edges in prop::collection::vec((0usize..7, 0usize..7, 0.1f64..3.0), 0..15)) {
        let mut g = WeightedGraph::empty(7, false);
        for (i, j, w) in edges {
            if i != j && !g.has_edge(i, j) {
                g.add_edge(i, j, w).unwrap();
            }
        }
        let e = sym_eig(&g.laplacian()).unwrap();
        prop_assert!(e.values[0].abs() < 1e-9);
        prop_assert!(e.values.iter().all(|&x| x > -1e-9));
        let l2 = g.fiedler(WeightMode::Raw).unwrap().lambda2;
        prop_assert!((l2 - e.values[1]).abs() < 1e-9);
    }
}

#[test]
fn singular_values_of_a_known_matrix() {
    // [[3, 0], [4, 5]] has singular values 3√5 and √5
    let m = DenseMatrix::from_rows(&[[3.0, 0.0], [4.0, 5.0]]).unwrap();
    let s = singular_values(&m).unwrap();
    assert!((s[0] - 3.0 * 5f64.sqrt()).abs() < 1e-12);
    assert!((s[1] - 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn star_graph_connectivity() {
    // the star on n vertices has λ₂ = 1
    let triples: Vec<(usize, usize, f64)> = (1..6).map(|j| (0, j, 1.0)).collect();
    let g = WeightedGraph::from_triples(6, false, &triples).unwrap();
    assert!((g.fiedler(WeightMode::Raw).unwrap().lambda2 - 1.0).abs() < 1e-12);
}
