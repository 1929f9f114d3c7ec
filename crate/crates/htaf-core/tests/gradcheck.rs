//! End-to-end gradient checks: full networks recorded on a tape, every
//! parameter coordinate compared against central finite differences.
//! The non-differentiable kinds (hard step and its straight-through
//! estimator) are covered by unit tests on their surrogate rules; here
//! we sweep the smooth stacks, both losses, and batch-norm composition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use htaf_core::activations::{ActivationSpec, HtafParams};
use htaf_core::matrix::Matrix;
use htaf_core::network::{init_network, Head, LayerSpec, Network};
use htaf_core::tape::Tape;

enum Loss {
    Mse(Vec<f64>),
    Sce(Vec<usize>),
}

fn loss_value(net: &mut Network, x: &Matrix, loss: &Loss) -> f64 {
    let mut tape = Tape::new();
    let traced = net.forward_traced(&mut tape, x.clone(), false).unwrap();
    let node = match loss {
        Loss::Mse(targets) => {
            let t = Matrix::from_shape_vec(targets.len(), 1, targets.clone()).unwrap();
            let t = tape.input(t);
            tape.mse_loss(traced.output, t).unwrap()
        }
        Loss::Sce(labels) => tape.softmax_cross_entropy(traced.output, labels).unwrap(),
    };
    tape.value(node).unwrap().get(0, 0)
}

/// Checks every weight and bias coordinate of `net` against a central
/// difference with step `h`. Returns the number of coordinates checked.
fn check_all_coordinates(mut net: Network, x: &Matrix, loss: &Loss, label: &str) -> usize {
    let mut tape = Tape::new();
    let traced = net.forward_traced(&mut tape, x.clone(), false).unwrap();
    let node = match loss {
        Loss::Mse(targets) => {
            let t = Matrix::from_shape_vec(targets.len(), 1, targets.clone()).unwrap();
            let t = tape.input(t);
            tape.mse_loss(traced.output, t).unwrap()
        }
        Loss::Sce(labels) => tape.softmax_cross_entropy(traced.output, labels).unwrap(),
    };
    let grads = tape.backward(node).unwrap();

    let h = 1e-4;
    let mut checked = 0;
    for l in 0..net.n_layers() {
        let gw = grads.get(traced.weights[l]).unwrap().clone();
        let w = net.weight(l).unwrap().clone();
        let (rows, cols) = w.shape();
        for r in 0..rows {
            for c in 0..cols {
                let fd = {
                    let bump = |delta: f64| {
                        let mut net_p = net.clone();
                        let mut wp = w.clone();
                        wp.set(r, c, w.get(r, c) + delta);
                        net_p.set_weight(l, wp).unwrap();
                        loss_value(&mut net_p, x, loss)
                    };
                    (bump(h) - bump(-h)) / (2.0 * h)
                };
                let an = gw.get(r, c);
                assert!(
                    (fd - an).abs() <= 1e-6 + 2e-4 * an.abs(),
                    "{label}: layer {l} weight ({r},{c}): fd {fd} vs analytic {an}"
                );
                checked += 1;
            }
        }

        let gb = grads.get(traced.biases[l]).unwrap().clone();
        let b = net.bias(l).unwrap().clone();
        for c in 0..b.cols() {
            let fd = {
                let bump = |delta: f64| {
                    let mut net_p = net.clone();
                    let mut bp = b.clone();
                    bp.set(0, c, b.get(0, c) + delta);
                    net_p.set_bias(l, bp).unwrap();
                    loss_value(&mut net_p, x, loss)
                };
                (bump(h) - bump(-h)) / (2.0 * h)
            };
            let an = gb.get(0, c);
            assert!(
                (fd - an).abs() <= 1e-6 + 2e-4 * an.abs(),
                "{label}: layer {l} bias {c}: fd {fd} vs analytic {an}"
            );
            checked += 1;
        }
    }
    checked
}

fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn regression_stacks_match_finite_differences() {
    let p = HtafParams::new(2.0, 11.0).unwrap();
    let stacks: Vec<(&str, ActivationSpec)> = vec![
        ("identity", ActivationSpec::Identity),
        ("relu", ActivationSpec::Relu),
        ("sigmoid", ActivationSpec::Sigmoid),
        ("tanh", ActivationSpec::Tanh),
        ("htaf", ActivationSpec::Htaf(p)),
        ("scaled_sigmoid", ActivationSpec::ScaledSigmoid { beta0: 10.0 }),
    ];
    let x = random_batch(8, 4, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let targets: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();

    for (label, act) in stacks {
        let net = init_network(
            vec![
                LayerSpec::dense(4, 5, act),
                LayerSpec::dense(5, 3, act),
                LayerSpec::dense(3, 1, ActivationSpec::Identity),
            ],
            Head::Regression,
            41,
        )
        .unwrap();
        let n = check_all_coordinates(net, &x, &Loss::Mse(targets.clone()), label);
        assert_eq!(n, 20 + 15 + 3 + 5 + 3 + 1);
    }
}

#[test]
fn classification_stack_matches_finite_differences() {
    let p = HtafParams::new(2.0, 11.0).unwrap();
    let net = init_network(
        vec![
            LayerSpec::dense(3, 6, ActivationSpec::Tanh),
            LayerSpec::dense(6, 4, ActivationSpec::Htaf(p)),
            LayerSpec::dense(4, 3, ActivationSpec::Identity),
        ],
        Head::Classification { n_classes: 3 },
        42,
    )
    .unwrap();
    let x = random_batch(9, 3, 19);
    let labels: Vec<usize> = vec![0, 1, 2, 2, 1, 0, 0, 2, 1];
    let n = check_all_coordinates(net, &x, &Loss::Sce(labels), "classification");
    assert_eq!(n, 18 + 24 + 12 + 6 + 4 + 3);
}

#[test]
fn batch_norm_layer_composes_with_finite_differences() {
    let net = init_network(
        vec![
            LayerSpec::dense(3, 5, ActivationSpec::Tanh).with_batch_norm(),
            LayerSpec::dense(5, 1, ActivationSpec::Identity),
        ],
        Head::Regression,
        43,
    )
    .unwrap();
    let x = random_batch(12, 3, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let targets: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    check_all_coordinates(net, &x, &Loss::Mse(targets), "batch_norm");
}

#[test]
fn fanned_out_nodes_accumulate_adjoints() {
    // x feeds the loss twice (as the prediction and through a square as
    // the target), so its adjoint is the sum over both paths.
    let x = random_batch(2, 3, 22);
    let build = |xm: &Matrix| {
        let mut tape = Tape::new();
        let xn = tape.input(xm.clone());
        let sq = tape.square(xn).unwrap();
        let loss = tape.mse_loss(xn, sq).unwrap();
        (tape, xn, loss)
    };

    let (tape, xn, loss) = build(&x);
    let grads = tape.backward(loss).unwrap();
    let gx = grads.get(xn).unwrap();

    let h = 1e-5;
    for r in 0..2 {
        for c in 0..3 {
            let fd = {
                let bump = |delta: f64| {
                    let mut xp = x.clone();
                    xp.set(r, c, x.get(r, c) + delta);
                    let (tape, _, loss) = build(&xp);
                    tape.value(loss).unwrap().get(0, 0)
                };
                (bump(h) - bump(-h)) / (2.0 * h)
            };
            let an = gx.get(r, c);
            assert!(
                (fd - an).abs() <= 1e-6 + 1e-5 * an.abs(),
                "fan-out ({r},{c}): fd {fd} vs analytic {an}"
            );
        }
    }
}

#[test]
fn network_backward_is_bitwise_reproducible() {
    let p = HtafParams::new(1.0, 22.0).unwrap();
    let x = random_batch(6, 4, 23);
    let targets: Vec<f64> = (0..6).map(|i| i as f64 / 6.0).collect();
    let run = || {
        let mut net = init_network(
            vec![
                LayerSpec::dense(4, 5, ActivationSpec::Htaf(p)),
                LayerSpec::dense(5, 1, ActivationSpec::Identity),
            ],
            Head::Regression,
            44,
        )
        .unwrap();
        let mut tape = Tape::new();
        let traced = net.forward_traced(&mut tape, x.clone(), false).unwrap();
        let t = Matrix::from_shape_vec(6, 1, targets.clone()).unwrap();
        let t = tape.input(t);
        let loss = tape.mse_loss(traced.output, t).unwrap();
        let grads = tape.backward(loss).unwrap();
        (0..net.n_layers())
            .map(|l| grads.get(traced.weights[l]).unwrap().clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn traced_forward_agrees_with_inference_without_batch_norm() {
    let p = HtafParams::new(2.0, 11.0).unwrap();
    let mut net = init_network(
        vec![
            LayerSpec::dense(4, 6, ActivationSpec::Htaf(p)),
            LayerSpec::dense(6, 2, ActivationSpec::Identity),
        ],
        Head::Classification { n_classes: 2 },
        45,
    )
    .unwrap();
    let x = random_batch(7, 4, 24);
    let inference = net.forward(&x).unwrap().output;
    let mut tape = Tape::new();
    let traced = net.forward_traced(&mut tape, x.clone(), false).unwrap();
    let trained_mode = tape.value(traced.output).unwrap();
    assert_eq!(&inference, trained_mode);
}
