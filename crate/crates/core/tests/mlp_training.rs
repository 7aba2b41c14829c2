use fem_surrogate_core::dataset::ScaledSet;
use fem_surrogate_core::mlp::{
    adam_step, backward, grad_check, mse, train, AdamParams, AdamState, Gradients, Mlp, Optimizer,
    TrainConfig,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(
    optimizer: Optimizer,
    learning_rate: f64,
    batch_size: usize,
    epochs: usize,
) -> TrainConfig {
    TrainConfig {
        optimizer,
        learning_rate,
        batch_size,
        epochs,
        seed: 3,
        adam: AdamParams::default(),
    }
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, n_in: usize, n_out: usize) -> ScaledSet {
    let row = |rng: &mut ChaCha8Rng, w: usize| (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScaledSet {
        inputs: (0..n).map(|_| row(rng, n_in)).collect(),
        targets: (0..n).map(|_| row(rng, n_out)).collect(),
    }
}

#[test]
fn fits_a_line_with_adam() {
    let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
    let data = ScaledSet {
        inputs: xs.iter().map(|&x| vec![x]).collect(),
        targets: xs.iter().map(|&x| vec![2.0 * x]).collect(),
    };
    let net = Mlp::init(&[1, 8, 1], 0).unwrap();
    let (net, history) = train(net, &data, None, &config(Optimizer::Adam, 1e-2, 16, 2000)).unwrap();
    let final_mse = mse(&net.predict_all(&data.inputs).unwrap(), &data.targets).unwrap();
    assert!(final_mse < 1e-4, "{final_mse}");
    assert_eq!(history.train_mse.len(), 2000);
    assert!(history.test_mse.is_none());
}

#[test]
fn full_batch_sgd_on_affine_model_never_increases_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = random_batch(&mut rng, 40, 3, 2);
    let net = Mlp::init(&[3, 2], 1).unwrap();
    let (_, history) = train(net, &data, None, &config(Optimizer::Sgd, 0.05, 40, 300)).unwrap();
    for pair in history.train_mse.windows(2) {
        assert!(pair[1] <= pair[0], "{} -> {}", pair[0], pair[1]);
    }
    assert!(history.train_mse[299] < history.train_mse[0]);
}

#[test]
fn gradient_ignores_sample_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = Mlp::init(&[2, 12, 7, 3], 9).unwrap();
    let data = random_batch(&mut rng, 33, 2, 3);
    let g = backward(&net, &data.inputs, &data.targets).unwrap();
    let mut order: Vec<usize> = (0..33).collect();
    for _ in 0..5 {
        order.shuffle(&mut rng);
        let xs: Vec<Vec<f64>> = order.iter().map(|&i| data.inputs[i].clone()).collect();
        let ts: Vec<Vec<f64>> = order.iter().map(|&i| data.targets[i].clone()).collect();
        let h = backward(&net, &xs, &ts).unwrap();
        for (a, b) in g.values().zip(h.values()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn gradients_agree_with_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..5 {
        let n_in = rng.gen_range(1..=2);
        let depth = rng.gen_range(0..=2);
        let mut sizes = vec![n_in];
        sizes.extend((0..depth).map(|_| rng.gen_range(1..=50)));
        sizes.push(rng.gen_range(1..=3));
        let net = Mlp::init(&sizes, rng.gen()).unwrap();
        let rows = rng.gen_range(1..=16);
        let batch = random_batch(&mut rng, rows, n_in, sizes[sizes.len() - 1]);
        let err = grad_check(&net, &batch.inputs, &batch.targets, 1e-6).unwrap();
        assert!(err < 1e-6, "{sizes:?}: {err}");
    }
}

#[test]
fn training_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let data = random_batch(&mut rng, 30, 1, 3);
    let held_out = random_batch(&mut rng, 8, 1, 3);
    for optimizer in [Optimizer::Sgd, Optimizer::Adam] {
        let run = || {
            let net = Mlp::init(&[1, 10, 10, 3], 5).unwrap();
            train(net, &data, Some(&held_out), &config(optimizer, 1e-2, 7, 40)).unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(ha.test_mse.as_ref().unwrap().len(), 40);
    }
}

#[test]
fn shuffle_seed_changes_the_result() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let data = random_batch(&mut rng, 30, 1, 1);
    let net = Mlp::init(&[1, 6, 1], 5).unwrap();
    let mut cfg = config(Optimizer::Sgd, 1e-2, 4, 5);
    let (a, _) = train(net.clone(), &data, None, &cfg).unwrap();
    cfg.seed += 1;
    let (b, _) = train(net, &data, None, &cfg).unwrap();
    assert_ne!(a, b);
}

proptest! {
    #[test]
    fn adam_second_moment_stays_non_negative(
        seed in any::<u64>(),
        steps in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 13), 1..30),
        lr in 1e-5f64..1.0,
    ) {
        let mut net = Mlp::init(&[2, 3, 1], seed).unwrap();
        let mut state = AdamState::new(&net);
        for step in &steps {
            let mut g = Gradients::zeros_like(&net);
            let mut it = step.iter().copied();
            for layer in &mut g.layers {
                for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                    *v = it.next().unwrap();
                }
            }
            adam_step(&mut net, &g, &mut state, lr, &AdamParams::default()).unwrap();
            prop_assert!(state.v.values().all(|v| v >= 0.0 && v.is_finite()));
        }
        prop_assert_eq!(state.t, steps.len() as u64);
    }
}
