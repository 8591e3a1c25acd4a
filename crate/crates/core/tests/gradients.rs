use std::sync::Arc;

use imgraph::corrgraph::GraphAdjacency;
use imgraph::features::FeatureMatrix;
use imgraph::gnn::{normalize_adjacency, GcnConfig, GcnModel, NormKind, NormalizedGraph};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, n: usize, dim: usize, classes: usize) -> NormalizedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i..n {
            if rng.random_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    let adj = GraphAdjacency::from_edges(n, edges).unwrap();
    let x = Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
    NormalizedGraph::new(
        Arc::new(normalize_adjacency(&adj)),
        Arc::new(FeatureMatrix::Dense(x)),
        rng.random_range(0..classes) as u8,
    )
    .unwrap()
}

fn config(norm: NormKind, seed: u64) -> GcnConfig {
    GcnConfig {
        layer_dims: vec![4, 4],
        num_classes: 3,
        norm,
        ..GcnConfig::desk(seed)
    }
}

/// Worst violation of |a - n| <= 1e-6 + 1e-3 * max(|a|, |n|) over all weights.
fn finite_difference_gap(model: &GcnModel, g: &NormalizedGraph) -> f64 {
    let (_, _, grads) = model.backward(g).unwrap();
    let h = 1e-4;
    let mut probe = model.clone();
    let analytic: Vec<f64> = grads
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();
    let mut k = 0;
    let mut worst: f64 = 0.0;
    let n_slices = probe.params.slices().len();
    for s in 0..n_slices {
        let len = probe.params.slices()[s].len();
        for e in 0..len {
            let orig = probe.params.slices()[s][e];
            probe.params.slices_mut()[s][e] = orig + h;
            let up = probe.loss(g).unwrap();
            probe.params.slices_mut()[s][e] = orig - h;
            let down = probe.loss(g).unwrap();
            probe.params.slices_mut()[s][e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let allowed = 1e-6 + 1e-3 * a.abs().max(numeric.abs());
            worst = worst.max((a - numeric).abs() / allowed);
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for norm in [NormKind::None, NormKind::Graph, NormKind::Layer] {
        for trial in 0..8 {
            let g = random_graph(&mut rng, 5, 3, 3);
            let model = GcnModel::new(3, config(norm, trial)).unwrap();
            let gap = finite_difference_gap(&model, &g);
            assert!(gap <= 1.0, "{norm:?} trial {trial}: gap ratio {gap}");
        }
    }
}

#[test]
fn duplicated_sample_doubles_summed_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_graph(&mut rng, 5, 3, 3);
    let model = GcnModel::new(3, config(NormKind::Graph, 1)).unwrap();
    let (l1, _, g1) = model.backward(&g).unwrap();
    let mut sum = g1.zeros_like();
    sum.add_assign(&g1);
    sum.add_assign(&g1);
    for (a, b) in sum.slices().iter().zip(g1.slices()) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(*x, 2.0 * y);
        }
    }
    assert!(l1.is_finite());
}

#[test]
fn confident_correct_prediction_has_tiny_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_graph(&mut rng, 5, 3, 3);
    let mut model = GcnModel::new(3, config(NormKind::None, 2)).unwrap();
    model.params.b_out = Array1::from(vec![0.0, 0.0, 0.0]);
    model.params.b_out[g.label as usize] = 60.0;
    let (loss, _, grads) = model.backward(&g).unwrap();
    assert!(loss < 1e-20);
    assert!(grads.sq_norm() < 1e-40);
}

/// Scalar re-implementation of the forward pass.
fn naive_logits(model: &GcnModel, g: &NormalizedGraph) -> Vec<f64> {
    let a = g.adjacency.to_dense();
    let x = g.features.to_dense();
    let n = a.nrows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    for w in &model.params.layers {
        let (din, dout) = w.dim();
        let mut hw = vec![vec![0.0; dout]; n];
        for i in 0..n {
            for o in 0..dout {
                for d in 0..din {
                    hw[i][o] += h[i][d] * w[[d, o]];
                }
            }
        }
        let mut z = vec![vec![0.0; dout]; n];
        for i in 0..n {
            for j in 0..n {
                for o in 0..dout {
                    z[i][o] += a[[i, j]] * hw[j][o];
                }
            }
        }
        assert_eq!(model.config.norm, NormKind::None);
        h = z
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
    }
    let width = h[0].len();
    let readout: Vec<f64> = (0..width)
        .map(|o| h.iter().map(|r| r[o]).sum::<f64>() / n as f64)
        .collect();
    let (din, classes) = model.params.w_out.dim();
    (0..classes)
        .map(|c| {
            model.params.b_out[c]
                + (0..din)
                    .map(|d| readout[d] * model.params.w_out[[d, c]])
                    .sum::<f64>()
        })
        .collect()
}

#[test]
fn forward_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..5 {
        let g = random_graph(&mut rng, 6, 3, 3);
        let mut model = GcnModel::new(3, config(NormKind::None, seed)).unwrap();
        model.params.b_out = Array1::from(vec![0.1, -0.2, 0.3]);
        let fast = model.forward(&g).unwrap();
        for (a, b) in fast.iter().zip(naive_logits(&model, &g)) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
