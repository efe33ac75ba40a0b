use maximin_norms::learner::{loss_and_gradient, LearnerConfig, OptimizerState, QNetwork, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest relative error between analytic and central-difference
/// gradients of the batch loss, over every parameter of a random net.
#[allow(dead_code)]
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = rng.gen_range(2..6);
    let hidden = rng.gen_range(2..8);
    let outputs = rng.gen_range(2..5);
    let dims = if rng.gen_bool(0.5) {
        vec![inputs, hidden, outputs]
    } else {
        vec![inputs, hidden, hidden, outputs]
    };
    let mut net = QNetwork::new(&dims, &mut rng);
    // random biases so no unit sits exactly at the rectifier kink
    let mut params = net.parameters();
    for p in &mut params {
        *p += rng.gen_range(-0.1..0.1);
    }
    net.set_parameters(&params);
    let target = QNetwork::new(&dims, &mut rng);
    let batch: Vec<Transition> = (0..4)
        .map(|_| Transition {
            state: (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: rng.gen_range(0..outputs),
            reward: rng.gen_range(-3.0..3.0),
            next_state: (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            done: rng.gen_bool(0.3),
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let cfg = LearnerConfig::default();
    let mut state = OptimizerState::new(cfg.optimizer);
    let (_, grads) = loss_and_gradient(&net, &target, &refs, &cfg, &mut state).unwrap();
    let analytic = grads.flatten();

    let loss_at = |p: &[f64], state: &mut OptimizerState| {
        let mut n = net.clone();
        n.set_parameters(p);
        loss_and_gradient(&n, &target, &refs, &cfg, state).unwrap().0
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus[i] += h;
        let mut minus = params.clone();
        minus[i] -= h;
        let numeric = (loss_at(&plus, &mut state) - loss_at(&minus, &mut state)) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}
