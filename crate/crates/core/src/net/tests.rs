use super::*;
use crate::linalg::{jacobi_svd, numerical_rank, stable_rank};
use rand::Rng;

fn coords(d: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(d, n, |_, _| rng.gen_range(-1.0..1.0))
}

fn sq_loss(net: &Network, x: &Matrix, y: &Matrix) -> f64 {
    let out = net.predict(x).unwrap();
    out.sub(y).unwrap().sum_squares()
}

#[test]
fn layer_shapes_for_five_layer_relu() {
    let arch = ArchSpec::uniform(2, 3, 5, 300, ActivationKind::Relu);
    let net = build_network(&arch, 0).unwrap();
    let shapes: Vec<_> = net.layers.iter().map(|l| l.weight.shape()).collect();
    assert_eq!(shapes, vec![(300, 2), (300, 300), (300, 300), (300, 300), (3, 300)]);
    assert!(net.layers.last().unwrap().activation.is_none());
    assert_eq!(net.hidden_layer_indices(), 1..4);
}

#[test]
fn fourier_encoding_sets_first_layer_width() {
    let arch = ArchSpec::uniform(2, 3, 4, 32, ActivationKind::Relu)
        .with_encoding(EncodingSpec::Fourier { features: 128, sigma: 10.0 });
    let net = build_network(&arch, 1).unwrap();
    assert_eq!(net.layers[0].in_dim(), 256);
}

#[test]
fn build_is_deterministic() {
    let arch = ArchSpec::uniform(2, 1, 3, 16, ActivationKind::Sine { omega: 30.0 })
        .with_encoding(EncodingSpec::Fourier { features: 8, sigma: 2.0 });
    assert_eq!(build_network(&arch, 9).unwrap(), build_network(&arch, 9).unwrap());
    assert_ne!(build_network(&arch, 9).unwrap(), build_network(&arch, 10).unwrap());
}

#[test]
fn siren_and_finer_init_ranges() {
    let arch = ArchSpec {
        in_dim: 2,
        out_dim: 1,
        depth: 4,
        hidden_dim: 64,
        first_activation: ActivationKind::Sine { omega: 40.0 },
        hidden_activation: ActivationKind::Sine { omega: 30.0 },
        encoding: EncodingSpec::Identity,
    };
    let net = build_network(&arch, 3).unwrap();
    assert!(net.layers[0].weight.max_abs() <= 0.5);
    let hidden_bound = (6.0f64 / 64.0).sqrt() / 30.0;
    for l in 1..4 {
        assert!(net.layers[l].weight.max_abs() <= hidden_bound);
    }

    let finer = ArchSpec {
        first_activation: ActivationKind::Finer { omega: 40.0 },
        hidden_activation: ActivationKind::Finer { omega: 40.0 },
        ..arch
    };
    let net = build_network(&finer, 3).unwrap();
    let b = &net.layers[1].bias;
    let max = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max <= std::f64::consts::FRAC_1_SQRT_2);
    // Wider than the fan-in default 1/8 would allow.
    assert!(max > 0.125);
}

#[test]
fn invalid_specs_rejected() {
    assert!(build_network(&ArchSpec::uniform(2, 1, 1, 8, ActivationKind::Relu), 0).is_err());
    assert!(build_network(&ArchSpec::uniform(2, 1, 3, 0, ActivationKind::Relu), 0).is_err());
    assert!(build_network(&ArchSpec::uniform(2, 1, 3, 8, ActivationKind::Sine { omega: -1.0 }), 0).is_err());
    let mixed = ArchSpec {
        first_activation: ActivationKind::Relu,
        ..ArchSpec::uniform(2, 1, 3, 8, ActivationKind::Sine { omega: 1.0 })
    };
    assert!(matches!(build_network(&mixed, 0), Err(Error::Config(_))));
}

#[test]
fn identity_linear_layer_passes_input() {
    let net = Network {
        encoding: Encoding::Identity,
        layers: vec![Layer {
            weight: Matrix::identity(3),
            bias: vec![0.0; 3],
            activation: None,
        }],
        in_dim: 3,
    };
    let x = coords(3, 6, 0);
    assert_eq!(net.predict(&x).unwrap(), x);
}

#[test]
fn relu_forward_matches_naive_reevaluation() {
    let arch = ArchSpec::uniform(2, 2, 3, 12, ActivationKind::Relu);
    let net = build_network(&arch, 5).unwrap();
    let x = coords(2, 10, 6);
    let out = net.predict(&x).unwrap();

    for j in 0..10 {
        let mut h: Vec<f64> = vec![x[(0, j)], x[(1, j)]];
        for layer in &net.layers {
            let mut next = Vec::new();
            for r in 0..layer.out_dim() {
                let mut z = layer.bias[r];
                for (c, hv) in h.iter().enumerate() {
                    z += layer.weight[(r, c)] * hv;
                }
                next.push(if layer.activation.is_some() { z.max(0.0) } else { z });
            }
            h = next;
        }
        for r in 0..2 {
            assert!((h[r] - out[(r, j)]).abs() < 1e-12);
        }
    }
}

#[test]
fn forward_reports_non_finite_layer() {
    let arch = ArchSpec::uniform(1, 1, 3, 4, ActivationKind::Relu);
    let mut net = build_network(&arch, 0).unwrap();
    net.layers[1].weight.data_mut().iter_mut().for_each(|w| *w = 1e300);
    net.layers[0].weight.data_mut().iter_mut().for_each(|w| *w = 1e300);
    net.layers[0].bias.iter_mut().for_each(|b| *b = 1.0);
    let err = net.predict(&Matrix::filled(1, 1, 1.0)).unwrap_err();
    assert!(matches!(err, Error::Numeric { layer: 1, .. }), "{err}");
}

#[test]
fn linear_layer_gradient_by_hand() {
    let w = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap();
    let net = Network {
        encoding: Encoding::Identity,
        layers: vec![Layer {
            weight: w.clone(),
            bias: vec![0.0, 0.0],
            activation: None,
        }],
        in_dim: 2,
    };
    let x = Matrix::column(&[0.3, -0.7]);
    let y = Matrix::column(&[1.0, -2.0]);
    let (out, cache) = net.forward(&x, true).unwrap();
    let residual = out.sub(&y).unwrap();
    let grads = net.backward(&cache.unwrap(), &residual.scale(2.0)).unwrap();
    let expected = matmul(&residual.scale(2.0), &x.transpose()).unwrap();
    assert!(grads.weights[0].sub(&expected).unwrap().max_abs() < 1e-15);
}

fn finite_difference_check(arch: &ArchSpec, seed: u64) {
    let net = build_network(arch, seed).unwrap();
    let x = coords(arch.in_dim, 7, seed + 100);
    let y = coords(arch.out_dim, 7, seed + 200);
    let (out, cache) = net.forward(&x, true).unwrap();
    let grad_out = out.sub(&y).unwrap().scale(2.0);
    let grads = net.backward(&cache.unwrap(), &grad_out).unwrap();

    let h = 1e-5;
    for (l, layer) in net.layers.iter().enumerate() {
        for idx in 0..layer.weight.len() {
            let mut plus = net.clone();
            plus.layers[l].weight.data_mut()[idx] += h;
            let mut minus = net.clone();
            minus.layers[l].weight.data_mut()[idx] -= h;
            let fd = (sq_loss(&plus, &x, &y) - sq_loss(&minus, &x, &y)) / (2.0 * h);
            let an = grads.weights[l].data()[idx];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            assert!(rel < 1e-4, "{}: layer {l} entry {idx}: fd {fd} vs {an}", arch.hidden_activation);
        }
        for i in 0..layer.bias.len() {
            let mut plus = net.clone();
            plus.layers[l].bias[i] += h;
            let mut minus = net.clone();
            minus.layers[l].bias[i] -= h;
            let fd = (sq_loss(&plus, &x, &y) - sq_loss(&minus, &x, &y)) / (2.0 * h);
            let an = grads.biases[l][i];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            assert!(rel < 1e-4, "bias layer {l}: fd {fd} vs {an}");
        }
    }
}

#[test]
fn gradients_match_finite_differences_for_every_activation() {
    let kinds = [
        ActivationKind::Relu,
        ActivationKind::Sine { omega: 3.0 },
        ActivationKind::Gaussian { a: 0.8 },
        ActivationKind::GaborReal { omega: 2.0, s: 0.7 },
        ActivationKind::Finer { omega: 2.0 },
    ];
    for (i, kind) in kinds.into_iter().enumerate() {
        finite_difference_check(&ArchSpec::uniform(2, 2, 3, 6, kind), i as u64);
    }
    finite_difference_check(
        &ArchSpec::uniform(2, 1, 3, 5, ActivationKind::Relu).with_encoding(EncodingSpec::Positional { bands: 3 }),
        11,
    );
    finite_difference_check(
        &ArchSpec::uniform(2, 1, 3, 5, ActivationKind::Sine { omega: 2.0 })
            .with_encoding(EncodingSpec::Fourier { features: 4, sigma: 1.0 }),
        12,
    );
}

#[test]
fn raw_coordinate_first_layer_gradient_has_stable_rank_at_most_two() {
    let net = build_network(&ArchSpec::uniform(2, 3, 4, 32, ActivationKind::Relu), 4).unwrap();
    let x = coords(2, 200, 8);
    let y = coords(3, 200, 9);
    let (out, cache) = net.forward(&x, true).unwrap();
    let grads = net.backward(&cache.unwrap(), &out.sub(&y).unwrap()).unwrap();
    assert!(stable_rank(&grads.weights[0]).unwrap() <= 2.0 + 1e-6);
    assert!(numerical_rank(&grads.weights[0], 1e-10).unwrap() <= 2);
}

#[test]
fn weight_gradient_is_delta_times_input_transpose() {
    let net = build_network(&ArchSpec::uniform(2, 2, 4, 8, ActivationKind::Gaussian { a: 1.0 }), 2).unwrap();
    let x = coords(2, 9, 1);
    let (out, cache) = net.forward(&x, true).unwrap();
    let cache = cache.unwrap();
    let grads = net.backward(&cache, &out).unwrap();
    for l in 0..net.depth() {
        let recomputed = matmul(&grads.deltas[l], &cache.inputs[l].transpose()).unwrap();
        assert_eq!(recomputed, grads.weights[l]);
    }
}

#[test]
fn gradient_stable_rank_bounded_by_factor_ranks() {
    for seed in 0..6 {
        let net = build_network(&ArchSpec::uniform(2, 3, 4, 10, ActivationKind::Relu), seed).unwrap();
        let x = coords(2, 12, seed + 50);
        let y = coords(3, 12, seed + 60);
        let (out, cache) = net.forward(&x, true).unwrap();
        let cache = cache.unwrap();
        let grads = net.backward(&cache, &out.sub(&y).unwrap()).unwrap();
        for l in 0..net.depth() {
            if grads.weights[l].is_zero() {
                continue;
            }
            let rank_h = numerical_rank(&cache.inputs[l], 1e-10).unwrap();
            let rank_g = numerical_rank(&grads.deltas[l], 1e-10).unwrap();
            let s = stable_rank(&grads.weights[l]).unwrap();
            assert!(s <= rank_h.min(rank_g) as f64 + 1e-6, "layer {l}: {s} vs {rank_h}/{rank_g}");
        }
    }
}

#[test]
fn backward_from_hidden_input_matches_finite_differences() {
    // Objective: sum of squares of the last hidden activation.
    let net = build_network(&ArchSpec::uniform(2, 1, 3, 5, ActivationKind::Sine { omega: 2.0 }), 3).unwrap();
    let x = coords(2, 6, 4);
    let objective = |n: &Network| {
        let (_, c) = n.forward(&x, true).unwrap();
        c.unwrap().inputs[2].sum_squares()
    };
    let (_, cache) = net.forward(&x, true).unwrap();
    let cache = cache.unwrap();
    let grad_h = cache.inputs[2].scale(2.0);
    let grads = net.backward_from_input_of(2, &cache, &grad_h).unwrap();
    assert!(grads.weights[2].is_zero());
    let h = 1e-5;
    for l in 0..2 {
        for idx in 0..net.layers[l].weight.len() {
            let mut p = net.clone();
            p.layers[l].weight.data_mut()[idx] += h;
            let mut m = net.clone();
            m.layers[l].weight.data_mut()[idx] -= h;
            let fd = (objective(&p) - objective(&m)) / (2.0 * h);
            let an = grads.weights[l].data()[idx];
            assert!((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6) < 1e-4);
        }
    }
}

#[test]
fn backward_shape_errors() {
    let net = build_network(&ArchSpec::uniform(2, 1, 3, 4, ActivationKind::Relu), 0).unwrap();
    let (_, cache) = net.forward(&coords(2, 5, 0), true).unwrap();
    let cache = cache.unwrap();
    assert!(net.backward(&cache, &Matrix::zeros(1, 4)).is_err());
    let other = build_network(&ArchSpec::uniform(2, 1, 4, 4, ActivationKind::Relu), 0).unwrap();
    assert!(other.backward(&cache, &Matrix::zeros(1, 5)).is_err());
    assert!(net.forward(&coords(3, 5, 0), false).is_err());
}

#[test]
fn svd_oracle_agrees_with_stable_rank_on_activations() {
    let net = build_network(&ArchSpec::uniform(2, 1, 3, 16, ActivationKind::Relu), 1).unwrap();
    let (_, cache) = net.forward(&coords(2, 40, 2), true).unwrap();
    let h = &cache.unwrap().inputs[1];
    let svd = jacobi_svd(h).unwrap();
    let exact: f64 = svd.sigma.iter().map(|s| s * s).sum::<f64>() / (svd.sigma[0] * svd.sigma[0]);
    assert!((stable_rank(h).unwrap() - exact).abs() < 1e-9);
}
