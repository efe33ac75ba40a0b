//! Fully connected Q-network with rectifier hidden layers and a linear head.
//!
//! Weights are stored input-major: `weights[i * outputs + o]` connects input
//! `i` to output `o`, so the forward pass is a sequence of axpy updates.
//!
//! # Weight file format
//!
//! Plain UTF-8 text, one record per line:
//!
//! ```text
//! qnetwork v1
//! dims 7 128 128 6
//! <layer 0 weights, inputs*outputs values, input-major>
//! <layer 0 biases, outputs values>
//! <layer 1 weights>
//! ...
//! ```
//!
//! Values are space separated and written in Rust's shortest round-trip
//! float notation, so a save/load cycle reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs);
        for w in &mut layer.weights {
            *w = rng.gen_range(-limit..=limit);
        }
        layer
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub layers: Vec<Dense>,
}

/// Same shape as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= factor);
            l.bias.iter_mut().for_each(|b| *b *= factor);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

/// Activations kept from a forward pass for backpropagation.
/// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl QNetwork {
    /// `dims` lists the input size, each hidden width, and the output size.
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "a network needs input and output sizes");
        QNetwork {
            layers: dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "a network needs input and output sizes");
        QNetwork {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_len()];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.parameter_count());
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(SimError::contract(format!(
                "network expects {} features, got {}",
                self.input_len(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cache = ForwardCache::default();
        self.forward_cached(x, &mut cache);
        Ok(cache.acts.pop().unwrap_or_default())
    }

    /// Forward pass that keeps every layer's activation. Input length must
    /// already be checked.
    pub(crate) fn forward_cached(&self, x: &[f64], cache: &mut ForwardCache) {
        cache.acts.resize_with(self.layers.len() + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let out = &mut tail[0];
            out.resize(layer.outputs, 0.0);
            layer.forward_into(&head[l], out);
            if l != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    /// Accumulate into `grads` the gradient of a loss whose derivative with
    /// respect to the network output is `d_out`.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_out: &[f64], grads: &mut Gradients, scratch: &mut Vec<f64>) {
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let input = &cache.acts[l];
            for (gb, d) in g.bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (gw, d) in row.iter_mut().zip(&delta) {
                    *gw += a * d;
                }
            }
            if l == 0 {
                break;
            }
            scratch.clear();
            for (i, &a) in input.iter().enumerate() {
                // input came out of a rectifier
                if a > 0.0 {
                    let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    scratch.push(dot(row, &delta));
                } else {
                    scratch.push(0.0);
                }
            }
            std::mem::swap(&mut delta, scratch);
        }
    }

    pub fn copy_from(&mut self, other: &QNetwork) {
        self.layers.clone_from(&other.layers);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("qnetwork v1\ndims");
        for d in self.dims() {
            let _ = write!(s, " {d}");
        }
        s.push('\n');
        for l in &self.layers {
            for values in [&l.weights, &l.bias] {
                let line: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |m: &str| SimError::parse(path, m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("qnetwork v1") {
            return Err(bad("missing `qnetwork v1` header"));
        }
        let dims_line = lines.next().ok_or_else(|| bad("missing dims line"))?;
        let mut parts = dims_line.split_whitespace();
        if parts.next() != Some("dims") {
            return Err(bad("expected `dims`"));
        }
        let dims: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_>>()?;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(bad("need at least two non-zero dimensions"));
        }
        let mut net = QNetwork::zeros(&dims);
        for layer in &mut net.layers {
            for target in [&mut layer.weights, &mut layer.bias] {
                let line = lines.next().ok_or_else(|| bad("truncated parameter block"))?;
                let values: Vec<f64> = line
                    .split_whitespace()
                    .map(|v| v.parse().map_err(|_| bad("bad float")))
                    .collect::<Result<_>>()?;
                if values.len() != target.len() {
                    return Err(bad("parameter count does not match dims"));
                }
                *target = values;
            }
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| SimError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_text(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Naive triple-loop oracle on the public layer fields.
    fn oracle_forward(net: &QNetwork, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (l, layer) in net.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs];
            for o in 0..layer.outputs {
                let mut s = layer.bias[o];
                for i in 0..layer.inputs {
                    s += layer.weights[i * layer.outputs + o] * a[i];
                }
                z[o] = if l + 1 < net.layers.len() { s.max(0.0) } else { s };
            }
            a = z;
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&[5, 8, 3]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer_reproduces_input() {
        let mut net = QNetwork::zeros(&[3, 3]);
        for i in 0..3 {
            net.layers[0].weights[i * 3 + i] = 1.0;
        }
        let x = [0.3, -1.5, 2.0];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn matches_matmul_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let net = QNetwork::new(&[7, 16, 16, 6], &mut rng);
            let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let got = net.forward(&x).unwrap();
            let want = oracle_forward(&net, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let net = QNetwork::zeros(&[4, 2]);
        assert!(matches!(net.forward(&[1.0]), Err(SimError::Contract(_))));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = QNetwork::new(&[7, 128, 128, 6], &mut ChaCha8Rng::seed_from_u64(3));
        let b = QNetwork::new(&[7, 128, 128, 6], &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let limit = (6.0f64 / (7.0 + 128.0)).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(a.is_finite());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let net = QNetwork::new(&[3, 5, 2], &mut ChaCha8Rng::seed_from_u64(8));
        let back = QNetwork::from_text(&net.to_text(), Path::new("mem")).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn malformed_weight_file_is_rejected() {
        let p = Path::new("w.txt");
        assert!(QNetwork::from_text("nope", p).is_err());
        assert!(QNetwork::from_text("qnetwork v1\ndims 2 1\n1 2\n", p).is_err());
        assert!(QNetwork::from_text("qnetwork v1\ndims 2 1\n1 2 3\n0\n", p).is_err());
        assert!(QNetwork::from_text("qnetwork v1\ndims 2 1\n1 2\n0\n", p).is_ok());
    }
}
