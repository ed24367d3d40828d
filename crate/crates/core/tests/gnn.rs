#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use pyrewire::data::{propagation_matrix, NodeDataset, Propagation};
use pyrewire::gnn::{Activation, GnnModel, Regularization};
use pyrewire::graph::WeightedGraph;
use pyrewire::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(
    seed: u64,
    n: usize,
    dims: &[usize],
    activation: Activation,
) -> (NodeDataset, GnnModel) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut g = WeightedGraph::empty(n, false);
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(0.3) {
                g.add_edge(i, j, 1.0).unwrap();
            }
        }
    }
    let classes = *dims.last().unwrap();
    let features = DenseMatrix::from_fn(n, dims[0], |_, _| r.gen_range(-1.0..1.0));
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let train: Vec<bool> = (0..n).map(|i| i < classes || r.gen_bool(0.6)).collect();
    let data = NodeDataset::new(
        propagation_matrix(&g, Propagation::Renormalized).unwrap(),
        features,
        labels,
        classes,
        train,
        vec![false; n],
        vec![false; n],
    )
    .unwrap();
    let mut model = GnnModel::init(dims, activation, seed).unwrap();
    for t in 0..model.depth() {
        for b in model.bias_mut(t) {
            *b = r.gen_range(-0.3..0.3);
        }
    }
    (data, model)
}

/// Triple loops over the dense operator; shares nothing with the library's
/// sparse kernels.
fn naive_logits(data: &NodeDataset, model: &GnnModel) -> Vec<Vec<f64>> {
    let a = data.propagation.to_dense();
    let n = data.n();
    let mut x: Vec<Vec<f64>> = (0..n).map(|i| data.features.row(i).to_vec()).collect();
    let depth = model.depth();
    for (t, layer) in model.layers().iter().enumerate() {
        let (d_in, d_out) = (layer.d_in(), layer.d_out());
        let mut xw = vec![vec![0.0; d_out]; n];
        for i in 0..n {
            for k in 0..d_in {
                for j in 0..d_out {
                    xw[i][j] += x[i][k] * layer.weight[(k, j)];
                }
            }
        }
        let mut next = vec![vec![0.0; d_out]; n];
        for i in 0..n {
            for m in 0..n {
                for j in 0..d_out {
                    next[i][j] += a[(i, m)] * xw[m][j];
                }
            }
            for j in 0..d_out {
                let z = next[i][j];
                next[i][j] = if t + 1 == depth {
                    z
                } else {
                    model.activation().apply(z)
                } + layer.bias[j];
            }
        }
        x = next;
    }
    x
}

#[test]
fn forward_matches_triple_loop_oracle() {
    for seed in 0..5 {
        let (data, model) = instance(seed, 9, &[4, 6, 5, 3], Activation::Swish);
        let logits = model.forward(&data).unwrap();
        let naive = naive_logits(&data, &model);
        for (i, row) in naive.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((logits.logits()[(i, j)] - v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn loss_is_masked_softmax_cross_entropy() {
    let (data, model) = instance(11, 8, &[3, 4, 2], Activation::Swish);
    let naive = naive_logits(&data, &model);
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..data.n() {
        if data.train_mask[i] {
            let lse = naive[i].iter().map(|z| z.exp()).sum::<f64>().ln();
            total += lse - naive[i][data.labels[i]];
            count += 1.0;
        }
    }
    let loss = model.loss(&data, Regularization::default()).unwrap();
    assert!((loss - total / count).abs() < 1e-12);
}

fn max_fd_error(data: &NodeDataset, model: &GnnModel, reg: Regularization) -> f64 {
    let (_, grads) = model.backward(data, reg).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for t in 0..model.depth() {
        let (gw, gb) = &grads.layers[t];
        let nw = gw.as_slice().len();
        for k in 0..nw + gb.len() {
            let analytic = if k < nw { gw.as_slice()[k] } else { gb[k - nw] };
            let probe = |d: f64| {
                let mut m = model.clone();
                if k < nw {
                    m.weight_mut(t).as_mut_slice()[k] += d;
                } else {
                    m.bias_mut(t)[k - nw] += d;
                }
                m.loss(data, reg).unwrap()
            };
            let fd = (probe(h) - probe(-h)) / (2.0 * h);
            worst = worst.max((analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6));
        }
    }
    worst
}

#[test]
fn backward_matches_finite_differences_for_deep_swish() {
    let (data, model) = instance(3, 10, &[5, 7, 6, 3], Activation::Swish);
    let reg = Regularization {
        weight_decay: 5e-4,
        l1: 0.0,
    };
    assert!(max_fd_error(&data, &model, reg) < 1e-5);
}

#[test]
fn backward_matches_finite_differences_for_identity() {
    let (data, model) = instance(4, 10, &[4, 5, 2], Activation::Identity);
    let reg = Regularization {
        weight_decay: 1e-2,
        l1: 0.0,
    };
    assert!(max_fd_error(&data, &model, reg) < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradients_agree_on_random_shapes(seed in 0u64..1000, hidden in 1usize..6, classes in 2usize..4) {
        let (data, model) = instance(seed, 8, &[3, hidden, classes], Activation::Swish);
        let reg = Regularization { weight_decay: 5e-4, l1: 0.0 };
        prop_assert!(max_fd_error(&data, &model, reg) < 1e-4);
    }
}
