use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a = f(z)`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Parse(format!("unknown activation '{other}'"))),
        }
    }
}

/// Fully connected network `sizes[0] -> sizes[1] -> ... -> sizes[L]`.
///
/// Parameters live in one flat vector, layer by layer: the `out x in`
/// weight matrix (row-major) followed by the `out` biases. Gradients use the
/// same layout, so optimizers work on flat slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<f64>,
}

/// Per-layer activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    sizes: Vec<usize>,
    /// `activations[0]` is the input, the last entry the output.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least input and output")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return config("an mlp needs at least an input and an output size");
        }
        if sizes.iter().any(|&s| s == 0) {
            return config(format!("layer sizes must be positive, got {sizes:?}"));
        }
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![0.0; n],
        })
    }

    /// Weights `~ Normal(0, gain^2 / fan_in)`, zero biases. Gain is 1 for
    /// tanh/identity layers and sqrt(2) for relu.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut RngStream) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        let gain = match hidden {
            Activation::Relu => 2f64.sqrt(),
            _ => 1.0,
        };
        let mut offset = 0;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let std = gain / (fan_in as f64).sqrt();
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.normal(0.0, std);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// Builds a network from explicit parameters in the flat layout.
    pub fn from_params(sizes: &[usize], hidden: Activation, output: Activation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        if params.len() != net.params.len() {
            return usage(format!(
                "expected {} parameters for sizes {sizes:?}, got {}",
                net.params.len(),
                params.len()
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters".into()));
        }
        net.params = params;
        Ok(net)
    }

    /// Multiplies the last layer's weights and biases by `factor`; a small
    /// factor starts a policy close to uniform.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let l = self.num_layers() - 1;
        let start = self.layer_offset(l);
        for p in &mut self.params[start..] {
            *p *= factor;
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Zeroed gradient buffer in the parameter layout.
    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes
            .windows(2)
            .take(layer)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return usage(format!(
                "mlp input has length {}, expected {}",
                input.len(),
                self.input_dim()
            ));
        }
        Ok(())
    }

    fn layer_forward(&self, layer: usize, offset: usize, x: &[f64], out: &mut Vec<f64>) {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let w = &self.params[offset..offset + n_in * n_out];
        let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        let act = self.activation_for(layer);
        out.clear();
        out.extend(w.chunks_exact(n_in).zip(b).map(|(row, &bias)| {
            let z = row.iter().zip(x).fold(bias, |acc, (w, x)| acc + w * x);
            act.apply(z)
        }));
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let mut y = Vec::new();
        let mut offset = 0;
        for l in 0..self.num_layers() {
            self.layer_forward(l, offset, &x, &mut y);
            std::mem::swap(&mut x, &mut y);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        Ok(x)
    }

    /// Forward pass that keeps every layer's activations for [`backward`](Self::backward).
    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..self.num_layers() {
            let mut y = Vec::with_capacity(self.sizes[l + 1]);
            self.layer_forward(l, offset, &activations[l], &mut y);
            activations.push(y);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        Ok(ForwardCache {
            sizes: self.sizes.clone(),
            activations,
        })
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64], grads: &mut [f64]) -> Result<()> {
        self.backward_impl(cache, output_grad, grads, false).map(|_| ())
    }

    /// Like [`backward`](Self::backward), also returning `d loss / d input`.
    pub fn backward_with_input(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        self.backward_impl(cache, output_grad, grads, true)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut [f64],
        want_input: bool,
    ) -> Result<Vec<f64>> {
        if cache.sizes != self.sizes || cache.activations.len() != self.sizes.len() {
            return usage("forward cache does not belong to this network");
        }
        if output_grad.len() != self.output_dim() {
            return usage(format!(
                "output gradient has length {}, expected {}",
                output_grad.len(),
                self.output_dim()
            ));
        }
        if grads.len() != self.params.len() {
            return usage("gradient buffer does not match parameter count");
        }
        let mut delta: Vec<f64> = output_grad.to_vec();
        let mut offsets: Vec<usize> = Vec::with_capacity(self.num_layers());
        let mut acc = 0;
        for l in 0..self.num_layers() {
            offsets.push(acc);
            acc += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut input_grad = Vec::new();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activation_for(l);
            let out = &cache.activations[l + 1];
            for (d, &a) in delta.iter_mut().zip(out) {
                *d *= act.derivative_from_output(a);
            }
            let x = &cache.activations[l];
            let off = offsets[l];
            let (gw, rest) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for ((row, gb), &d) in gw.chunks_exact_mut(n_in).zip(rest.iter_mut()).zip(&delta) {
                *gb += d;
                if d != 0.0 {
                    for (g, &xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l > 0 || want_input {
                let w = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (row, &d) in w.chunks_exact(n_in).zip(&delta) {
                    if d != 0.0 {
                        for (p, &wij) in prev.iter_mut().zip(row) {
                            *p += d * wij;
                        }
                    }
                }
                if l == 0 {
                    input_grad = prev;
                } else {
                    delta = prev;
                }
            }
        }
        Ok(input_grad)
    }

    /// Polyak averaging: `self <- (1 - tau) * self + tau * source`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        assert_eq!(self.sizes, source.sizes, "soft update between different shapes");
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = (1.0 - tau) * *t + tau * s;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_output_final_bias() {
        let mut net = Mlp::zeros(&[3, 4, 2], Activation::Tanh, Activation::Identity).unwrap();
        let n = net.num_params();
        net.params_mut()[n - 2] = 0.7;
        net.params_mut()[n - 1] = -1.5;
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.7, -1.5]);
    }

    #[test]
    fn identity_layer() {
        let params = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let net = Mlp::from_params(&[2, 2], Activation::Tanh, Activation::Identity, params).unwrap();
        assert_eq!(net.forward(&[0.3, -4.0]).unwrap(), vec![0.3, -4.0]);
    }

    #[test]
    fn hand_unrolled_two_three_one_tanh() {
        // Weights enumerated 0.1, 0.2, ... in layout order.
        let params: Vec<f64> = (1..=13).map(|i| i as f64 / 10.0).collect();
        let net = Mlp::from_params(&[2, 3, 1], Activation::Tanh, Activation::Identity, params).unwrap();
        let (x0, x1) = (0.5, -1.0);
        let h0 = (0.1 * x0 + 0.2 * x1 + 0.7f64).tanh();
        let h1 = (0.3 * x0 + 0.4 * x1 + 0.8f64).tanh();
        let h2 = (0.5 * x0 + 0.6 * x1 + 0.9f64).tanh();
        let y = 1.0 * h0 + 1.1 * h1 + 1.2 * h2 + 1.3;
        let out = net.forward(&[x0, x1]).unwrap();
        assert!((out[0] - y).abs() < 1e-15);
    }

    #[test]
    fn input_dim_mismatch() {
        let net = Mlp::zeros(&[3, 2], Activation::Tanh, Activation::Identity).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn foreign_cache_rejected() {
        let a = Mlp::zeros(&[3, 2], Activation::Tanh, Activation::Identity).unwrap();
        let b = Mlp::zeros(&[2, 2], Activation::Tanh, Activation::Identity).unwrap();
        let cache = b.forward_cached(&[1.0, 2.0]).unwrap();
        let mut g = a.zero_grads();
        assert!(matches!(a.backward(&cache, &[1.0, 1.0], &mut g), Err(Error::Usage(_))));
    }

    #[test]
    fn linear_squared_error_gradient_closed_form() {
        let mut rng = RngStream::new(1, "init");
        let net = Mlp::new(&[3, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let x = [0.5, -1.0, 2.0];
        let y = [0.25, -0.75];
        let cache = net.forward_cached(&x).unwrap();
        let r: Vec<f64> = cache.output().iter().zip(&y).map(|(o, t)| o - t).collect();
        let out_grad: Vec<f64> = r.iter().map(|ri| 2.0 * ri).collect();
        let mut g = net.zero_grads();
        net.backward(&cache, &out_grad, &mut g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert!((g[o * 3 + i] - 2.0 * r[o] * x[i]).abs() < 1e-14);
            }
            assert!((g[6 + o] - 2.0 * r[o]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = RngStream::new(2, "init");
        let net = Mlp::new(&[4, 8, 3], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let cache = net.forward_cached(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut g = net.zero_grads();
        net.backward(&cache, &[0.0; 3], &mut g).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn activation_names_round_trip() {
        for a in [Activation::Tanh, Activation::Relu, Activation::Identity] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
        }
    }

    #[test]
    fn soft_update_interpolates() {
        let a = Mlp::from_params(&[1, 1], Activation::Tanh, Activation::Identity, vec![1.0, 1.0]).unwrap();
        let mut b = Mlp::zeros(&[1, 1], Activation::Tanh, Activation::Identity).unwrap();
        b.soft_update_from(&a, 0.25);
        assert_eq!(b.params(), &[0.25, 0.25]);
    }
}
