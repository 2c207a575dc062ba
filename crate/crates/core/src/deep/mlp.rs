//! Dense feed-forward network with rectifier hidden layers and a linear output.
//!
//! Parameters live in one flat vector so the optimizer can treat them
//! uniformly. Layer `l` stores its weights row-major (`out x in`) followed by
//! its biases.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer pre-activations and activations from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], |v| v.as_slice())
    }
}

impl MlpNetwork {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        }
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(sizes);
        if params.len() != net.params.len() {
            return Err(SimError::Checkpoint(format!(
                "expected {} parameters for dims {:?}, found {}",
                net.params.len(),
                sizes,
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes[..=layer]
            .windows(2)
            .take(layer)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache);
        cache.acts.pop().unwrap()
    }

    /// Forward pass that keeps what backpropagation needs. Buffers in `cache`
    /// are reused across calls.
    pub fn forward_cached(&self, input: &[f64], cache: &mut ForwardCache) {
        assert_eq!(
            input.len(),
            self.input_width(),
            "state width does not match network input"
        );
        let layers = self.num_layers();
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.pre.resize_with(layers, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let (before, after) = cache.acts.split_at_mut(l + 1);
            let x = &before[l];
            let z = &mut cache.pre[l];
            z.clear();
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                z.push(dot + b[o]);
            }
            let a = &mut after[0];
            a.clear();
            if l + 1 == layers {
                a.extend_from_slice(z);
            } else {
                a.extend(z.iter().map(|&v| v.max(0.0)));
            }
        }
    }

    /// Accumulates into `grad` the gradient of a scalar loss whose derivative
    /// with respect to the network output is `d_out`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let layers = self.num_layers();
        let mut delta = d_out.to_vec();
        let mut next_delta = Vec::new();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.layer_offset(l);
            let x = &cache.acts[l];
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            next_delta.clear();
            next_delta.resize(n_in, 0.0);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (nd, wi) in next_delta.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *nd += d * wi;
                }
            }
            for (nd, &z) in next_delta.iter_mut().zip(&cache.pre[l - 1]) {
                if z <= 0.0 {
                    *nd = 0.0;
                }
            }
            std::mem::swap(&mut delta, &mut next_delta);
        }
    }

    /// Text form: `mlp`, a `dims` line, then one line per weight row and one
    /// bias line per layer.
    pub fn to_text(&self) -> String {
        let mut out = String::from("mlp\ndims");
        for s in &self.sizes {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        let mut off = 0;
        for w in self.sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            for row in 0..n_out + 1 {
                let len = if row < n_out { n_in } else { n_out };
                let vals: Vec<String> = self.params[off..off + len].iter().map(|v| v.to_string()).collect();
                out.push_str(&vals.join(" "));
                out.push('\n');
                off += len;
            }
        }
        out
    }

    /// Parses [`MlpNetwork::to_text`]; returns the network and lines consumed.
    pub fn from_text(text: &str) -> Result<(Self, usize)> {
        let bad = |m: &str| SimError::Checkpoint(format!("mlp: {m}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("mlp") {
            return Err(bad("missing header"));
        }
        let dims_line = lines.next().ok_or_else(|| bad("missing dims"))?;
        let sizes = dims_line
            .strip_prefix("dims")
            .ok_or_else(|| bad("missing dims"))?
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("dims"))?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(bad("dims"));
        }
        let mut params = Vec::new();
        let mut used = 2;
        for w in sizes.windows(2) {
            for row in 0..w[1] + 1 {
                let expect = if row < w[1] { w[0] } else { w[1] };
                let line = lines.next().ok_or_else(|| bad("truncated"))?;
                used += 1;
                let vals = line
                    .split_whitespace()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("value"))?;
                if vals.len() != expect {
                    return Err(bad("row length"));
                }
                params.extend(vals);
            }
        }
        Ok((Self::from_params(&sizes, params)?, used))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = MlpNetwork::zeros(&[10, 32, 32, 5]);
        assert_eq!(net.forward(&[0.3; 10]), vec![0.0; 5]);
        assert_eq!(net.params().len(), 10 * 32 + 32 + 32 * 32 + 32 + 32 * 5 + 5);
    }

    #[test]
    fn hand_computed_two_neuron_path() {
        // 2 -> 2 -> 2 -> 1
        // hidden1 = relu([1*x0 - 1*x1 + 0.5, 2*x1 - 1]); hidden2 = relu([h0 + h1, -h0]); out = 3*g0 - g1 + 0.25
        let params = vec![
            1.0, -1.0, 0.0, 2.0, 0.5, -1.0, // layer 0
            1.0, 1.0, -1.0, 0.0, 0.0, 0.0, // layer 1
            3.0, -1.0, 0.25, // layer 2
        ];
        let net = MlpNetwork::from_params(&[2, 2, 2, 1], params).unwrap();
        // x = (2, 1): h = relu(1.5, 1) = (1.5, 1); g = relu(2.5, -1.5) = (2.5, 0); out = 7.75
        assert_eq!(net.forward(&[2.0, 1.0]), vec![7.75]);
        // x = (0, 2): h = relu(-1.5, 3) = (0, 3); g = (3, 0); out = 9.25
        assert_eq!(net.forward(&[0.0, 2.0]), vec![9.25]);
    }

    #[test]
    fn negative_preactivation_is_cut() {
        let params = vec![-1.0, 0.0, 5.0, 0.0];
        let net = MlpNetwork::from_params(&[1, 1, 1], params).unwrap();
        assert_eq!(net.forward(&[3.0]), vec![0.0]);
        assert_eq!(net.forward(&[-3.0]), vec![15.0]);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let net = MlpNetwork::glorot(&[10, 32, 32, 5], &mut ChaCha8Rng::seed_from_u64(5));
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let a = net.forward(&x);
        let b = net.forward(&x);
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn text_round_trip() {
        let net = MlpNetwork::glorot(&[4, 3, 3, 2], &mut ChaCha8Rng::seed_from_u64(1));
        let text = net.to_text();
        let (back, used) = MlpNetwork::from_text(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(used, text.lines().count());
        assert!(MlpNetwork::from_text("mlp\ndims 2 2\n1 2\n").is_err());
    }

    #[test]
    #[should_panic(expected = "state width")]
    fn wrong_input_width_panics() {
        MlpNetwork::zeros(&[3, 2, 1]).forward(&[1.0]);
    }
}
