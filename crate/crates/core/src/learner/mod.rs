//! Deep Q-learning: network, replay memory, Huber loss, epsilon-greedy
//! selection, batch training and target synchronisation.

mod network;
mod replay;

use rand::Rng;
use serde::Deserialize;

pub use network::{Dense, ForwardCache, Gradients, QNetwork};
pub use replay::{ReplayBuffer, Transition};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub batch_size: usize,
    /// Agent steps between target-network copies.
    pub target_sync_period: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub replay_capacity: usize,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub huber_delta: f64,
    pub optimizer: Optimizer,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            batch_size: 64,
            target_sync_period: 50,
            epsilon_start: 0.9,
            epsilon_end: 0.0,
            learning_rate: 1e-4,
            discount: 0.99,
            replay_capacity: 10_000,
            hidden_units: 128,
            hidden_layers: 2,
            huber_delta: 1.0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.epsilon_start) || !eps_ok(self.epsilon_end) {
            return Err(SimError::config("epsilon must lie in [0, 1]"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(SimError::config("discount must lie in (0, 1]"));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(SimError::config(
                "batch_size must be positive and at most replay_capacity",
            ));
        }
        if self.target_sync_period == 0 {
            return Err(SimError::config("target_sync_period must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.huber_delta > 0.0) {
            return Err(SimError::config("learning_rate and huber_delta must be > 0"));
        }
        if self.hidden_units == 0 {
            return Err(SimError::config("hidden_units must be positive"));
        }
        Ok(())
    }

    pub fn network_dims(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut dims = vec![inputs];
        dims.extend(std::iter::repeat(self.hidden_units).take(self.hidden_layers));
        dims.push(outputs);
        dims
    }

    /// Linear decay from `epsilon_start` at the first training episode to
    /// `epsilon_end` at the last one.
    pub fn epsilon_for(&self, episode: usize, total_episodes: usize) -> f64 {
        if total_episodes <= 1 {
            return self.epsilon_end;
        }
        let frac = episode.min(total_episodes - 1) as f64 / (total_episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

pub fn huber(prediction: f64, target: f64, delta: f64) -> f64 {
    let r = (prediction - target).abs();
    if r <= delta {
        0.5 * r * r
    } else {
        delta * (r - 0.5 * delta)
    }
}

/// Derivative of [`huber`] with respect to the prediction.
pub fn huber_grad(prediction: f64, target: f64, delta: f64) -> f64 {
    let r = prediction - target;
    r.clamp(-delta, delta)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over the network's outputs.
pub fn select_action<R: Rng>(net: &QNetwork, features: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    let q = net.forward(features)?;
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..q.len()))
    } else {
        Ok(argmax(&q))
    }
}

/// Adam moment estimates; unused for plain SGD.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    m: Option<Gradients>,
    v: Option<Gradients>,
    t: i32,
    grads: Option<Gradients>,
    cache: ForwardCache,
    target_cache: ForwardCache,
    scratch: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer) -> Self {
        OptimizerState {
            kind,
            m: None,
            v: None,
            t: 0,
            grads: None,
            cache: ForwardCache::default(),
            target_cache: ForwardCache::default(),
            scratch: Vec::new(),
        }
    }

    fn apply(&mut self, net: &mut QNetwork, grads: &Gradients, lr: f64) {
        match self.kind {
            Optimizer::Sgd => {
                for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
                    for (w, d) in layer.weights.iter_mut().zip(&g.weights) {
                        *w -= lr * d;
                    }
                    for (b, d) in layer.bias.iter_mut().zip(&g.bias) {
                        *b -= lr * d;
                    }
                }
            }
            Optimizer::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                let m = self.m.get_or_insert_with(|| Gradients::zeros_like(net));
                let v = self.v.get_or_insert_with(|| Gradients::zeros_like(net));
                self.t += 1;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for (((layer, g), m), v) in net
                    .layers
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(&mut m.layers)
                    .zip(&mut v.layers)
                {
                    let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                    let gs = g.weights.iter().chain(&g.bias);
                    let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
                    let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
                    for (((p, g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                        *m = B1 * *m + (1.0 - B1) * g;
                        *v = B2 * *v + (1.0 - B2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                    }
                }
            }
        }
    }
}

/// TD target `r + discount * max_a target(s')`, no bootstrap on terminal
/// transitions.
pub fn td_target(target_net: &QNetwork, t: &Transition, discount: f64) -> Result<f64> {
    if t.done {
        return Ok(t.reward);
    }
    let q_next = target_net.forward(&t.next_state)?;
    Ok(t.reward + discount * q_next[argmax(&q_next)])
}

/// Mean Huber loss of the acted Q-values against their TD targets, and its
/// gradient with respect to every parameter of `net`.
pub fn loss_and_gradient(
    net: &QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &LearnerConfig,
    state: &mut OptimizerState,
) -> Result<(f64, Gradients)> {
    let mut grads = state
        .grads
        .take()
        .unwrap_or_else(|| Gradients::zeros_like(net));
    grads.clear();
    let loss = accumulate(net, target_net, batch, cfg, state, &mut grads)?;
    Ok((loss, grads))
}

fn accumulate(
    net: &QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &LearnerConfig,
    state: &mut OptimizerState,
    grads: &mut Gradients,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(SimError::contract("training batch is empty"));
    }
    let n = batch.len() as f64;
    let outputs = net.output_len();
    let mut d_out = vec![0.0; outputs];
    let mut total = 0.0;
    for t in batch {
        if t.state.len() != net.input_len() || t.next_state.len() != net.input_len() {
            return Err(SimError::contract("transition feature length mismatch"));
        }
        if t.action >= outputs {
            return Err(SimError::contract(format!("action index {} out of range", t.action)));
        }
        let target = if t.done {
            t.reward
        } else {
            target_net.forward_cached(&t.next_state, &mut state.target_cache);
            let q = state.target_cache.output();
            t.reward + cfg.discount * q[argmax(q)]
        };
        net.forward_cached(&t.state, &mut state.cache);
        let q_a = state.cache.output()[t.action];
        total += huber(q_a, target, cfg.huber_delta);
        d_out.fill(0.0);
        d_out[t.action] = huber_grad(q_a, target, cfg.huber_delta) / n;
        net.backward(&state.cache, &d_out, grads, &mut state.scratch);
    }
    let loss = total / n;
    if !loss.is_finite() {
        return Err(SimError::Training(format!("non-finite loss {loss}")));
    }
    Ok(loss)
}

/// One gradient step on `batch`. Returns the mean loss before the update.
pub fn train_batch(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &LearnerConfig,
    state: &mut OptimizerState,
) -> Result<f64> {
    let (loss, grads) = loss_and_gradient(net, target_net, batch, cfg, state)?;
    state.apply(net, &grads, cfg.learning_rate);
    state.grads = Some(grads);
    if !net.is_finite() {
        return Err(SimError::Training("parameters became non-finite".into()));
    }
    Ok(loss)
}

/// Copy the online weights into the target network when `step` is a
/// multiple of `period`. Returns whether a copy happened.
pub fn sync_target(net: &QNetwork, target_net: &mut QNetwork, step: u64, period: usize) -> bool {
    assert!(period >= 1, "sync period must be at least 1");
    if step % period as u64 == 0 {
        target_net.copy_from(net);
        true
    } else {
        false
    }
}
