use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, uniform};
use crate::scalar::{all_finite, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// Whether dropout masks are sampled during a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    /// Deterministic pass. With inverted dropout this is the mean network.
    Off,
    /// Sample Bernoulli masks from the given seed.
    Sample(u64),
}

/// One dense layer. Weights are row-major `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Layer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Inverted-dropout rate applied to this layer's output (0 disables).
    pub dropout: T,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    #[inline]
    fn row(&self, o: usize) -> &[T] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub out_dim: usize,
    pub activation: Activation,
    pub dropout: f64,
}

/// Feed-forward multi-layer perceptron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
}

/// Activations recorded by a forward pass, consumed by `backward`.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    /// Post-activation values before the dropout mask.
    post: Vec<Vec<T>>,
    masks: Vec<Option<Vec<T>>>,
    output: Vec<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        &self.output
    }

    pub fn input(&self) -> &[T] {
        &self.inputs[0]
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![T::zero(); l.bias.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.tensors_mut().for_each(|t| t.iter_mut().for_each(|x| *x = T::zero()));
    }

    pub fn scale(&mut self, k: T) {
        self.tensors_mut().for_each(|t| t.iter_mut().for_each(|x| *x *= k));
    }

    pub fn add_scaled(&mut self, other: &Gradients<T>, k: T) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x += k * y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| all_finite(t))
    }

    /// Weight and bias tensors interleaved per layer: `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> impl Iterator<Item = &Vec<T>> {
        self.weights.iter().zip(&self.bias).flat_map(|(w, b)| [w, b])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<T>> {
        self.weights.iter_mut().zip(self.bias.iter_mut()).flat_map(|(w, b)| [w, b])
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors().flat_map(|t| t.iter().copied()).collect()
    }
}

#[inline]
fn dot4<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl<T: Scalar> Mlp<T> {
    /// Build a network with Glorot-uniform weights (He-uniform for ReLU
    /// layers) and zero biases.
    pub fn new(input_dim: usize, specs: &[LayerSpec], seed: u64) -> Self {
        let mut rng = rng_from(seed, &[0x6e6e]);
        let mut in_dim = input_dim;
        let layers = specs
            .iter()
            .map(|s| {
                let bound = match s.activation {
                    Activation::Relu => (6.0 / in_dim as f64).sqrt(),
                    _ => (6.0 / (in_dim + s.out_dim) as f64).sqrt(),
                };
                let weights = (0..in_dim * s.out_dim)
                    .map(|_| uniform(&mut rng, -bound, bound))
                    .collect();
                let layer = Layer {
                    in_dim,
                    out_dim: s.out_dim,
                    activation: s.activation,
                    dropout: T::lit(s.dropout),
                    weights,
                    bias: vec![T::zero(); s.out_dim],
                };
                in_dim = s.out_dim;
                layer
            })
            .collect();
        Self { layers }
    }

    /// `hidden` layers with a shared activation followed by a linear output.
    pub fn dense(input_dim: usize, hidden: &[usize], output_dim: usize, activation: Activation, dropout: f64, seed: u64) -> Self {
        let mut specs: Vec<LayerSpec> = hidden
            .iter()
            .map(|&h| LayerSpec { out_dim: h, activation, dropout })
            .collect();
        specs.push(LayerSpec { out_dim: output_dim, activation: Activation::Identity, dropout: 0.0 });
        Self::new(input_dim, &specs, seed)
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim {
                return Err(Error::Shape { context: "layer weights", expected: l.in_dim * l.out_dim, got: l.weights.len() });
            }
            if l.bias.len() != l.out_dim {
                return Err(Error::Shape { context: "layer bias", expected: l.out_dim, got: l.bias.len() });
            }
            if i > 0 && layers[i - 1].out_dim != l.in_dim {
                return Err(Error::Shape { context: "layer chain", expected: layers[i - 1].out_dim, got: l.in_dim });
            }
            if !(l.dropout >= T::zero() && l.dropout < T::one()) {
                return Err(Error::config("dropout rate must be in [0, 1)"));
            }
            if !all_finite(&l.weights) || !all_finite(&l.bias) {
                return Err(Error::NonFinite("layer parameters"));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| l.dropout > T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| all_finite(&l.weights) && all_finite(&l.bias))
    }

    /// Parameter tensors in the same order as [`Gradients::tensors`].
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<T>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Vec<T>> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }

    /// Forward pass recording what `backward` needs.
    pub fn forward(&self, input: &[T], dropout: DropoutMode) -> Result<ForwardCache<T>> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape { context: "network input", expected: self.input_dim(), got: input.len() });
        }
        let mut rng = match dropout {
            DropoutMode::Sample(seed) => Some(rng_from(seed, &[0xd0])),
            DropoutMode::Off => None,
        };
        let n = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            output: Vec::new(),
        };
        let mut x = input.to_vec();
        for layer in &self.layers {
            let pre: Vec<T> = (0..layer.out_dim).map(|o| layer.bias[o] + dot4(layer.row(o), &x)).collect();
            let post: Vec<T> = pre.iter().map(|&z| layer.activation.apply(z)).collect();
            let mask = match rng.as_mut() {
                Some(r) if layer.dropout > T::zero() => {
                    let p = layer.dropout.as_f64();
                    let keep = T::one() / (T::one() - layer.dropout);
                    Some((0..layer.out_dim).map(|_| if r.random::<f64>() < p { T::zero() } else { keep }).collect::<Vec<T>>())
                }
                _ => None,
            };
            let out = match &mask {
                Some(m) => post.iter().zip(m).map(|(&y, &k)| y * k).collect(),
                None => post.clone(),
            };
            cache.inputs.push(std::mem::replace(&mut x, out));
            cache.pre.push(pre);
            cache.post.push(post);
            cache.masks.push(mask);
        }
        cache.output = x;
        Ok(cache)
    }

    /// Output only, no cache.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(input, DropoutMode::Off)?.output)
    }

    /// Reverse-mode pass: accumulate `dL/dparams` into `grads` and return
    /// `dL/dinput`.
    pub fn backward_into(&self, cache: &ForwardCache<T>, d_output: &[T], grads: &mut Gradients<T>) -> Result<Vec<T>> {
        if d_output.len() != self.output_dim() {
            return Err(Error::Shape { context: "output gradient", expected: self.output_dim(), got: d_output.len() });
        }
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape { context: "forward cache", expected: self.layers.len(), got: cache.inputs.len() });
        }
        let mut d = d_output.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if let Some(mask) = &cache.masks[l] {
                d.iter_mut().zip(mask).for_each(|(g, &k)| *g *= k);
            }
            let d_pre: Vec<T> = d
                .iter()
                .zip(cache.pre[l].iter().zip(&cache.post[l]))
                .map(|(&g, (&z, &y))| g * layer.activation.derivative(z, y))
                .collect();
            let x = &cache.inputs[l];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.bias[l];
            let mut d_in = vec![T::zero(); layer.in_dim];
            for (o, &dp) in d_pre.iter().enumerate() {
                gb[o] += dp;
                if dp.is_zero() {
                    continue;
                }
                let row = o * layer.in_dim;
                for (g, &xi) in gw[row..row + layer.in_dim].iter_mut().zip(x) {
                    *g += dp * xi;
                }
                for (di, &w) in d_in.iter_mut().zip(layer.row(o)) {
                    *di += w * dp;
                }
            }
            d = d_in;
        }
        Ok(d)
    }

    /// Fresh parameter gradients for one output gradient.
    pub fn backward(&self, cache: &ForwardCache<T>, d_output: &[T]) -> Result<(Gradients<T>, Vec<T>)> {
        let mut g = Gradients::zeros_like(self);
        let d_in = self.backward_into(cache, d_output, &mut g)?;
        Ok((g, d_in))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_net(sizes: &[usize], act: Activation, seed: u64) -> Mlp<f64> {
        let specs: Vec<LayerSpec> = sizes[1..]
            .iter()
            .map(|&o| LayerSpec { out_dim: o, activation: act, dropout: 0.0 })
            .collect();
        let mut net = Mlp::new(sizes[0], &specs, seed);
        let mut rng = rng_from(seed, &[7]);
        for l in net.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        net
    }

    #[test]
    fn zero_weight_network_outputs_last_bias() {
        let mut net = Mlp::<f64>::dense(3, &[4], 2, Activation::Tanh, 0.0, 1);
        for l in net.layers_mut() {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        net.layers_mut()[1].bias = vec![0.3, -0.7];
        assert_eq!(net.predict(&[1.0, -2.0, 5.0]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn identity_layer_with_identity_weights_is_identity() {
        let net = Mlp::from_layers(vec![Layer {
            in_dim: 3,
            out_dim: 3,
            activation: Activation::Identity,
            dropout: 0.0,
            weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            bias: vec![0.0; 3],
        }])
        .unwrap();
        assert_eq!(net.predict(&[0.25, -1.5, 3.0]).unwrap(), vec![0.25, -1.5, 3.0]);
    }

    #[test]
    fn forward_matches_reference_matrix_arithmetic() {
        // Reference: the same network evaluated with textbook nested loops.
        let net = random_net(&[3, 5, 4, 2], Activation::Tanh, 11);
        let x = [0.3, -0.8, 1.1];
        let mut h = x.to_vec();
        for l in net.layers() {
            let mut next = vec![0.0; l.out_dim];
            for o in 0..l.out_dim {
                let mut z = l.bias[o];
                for i in 0..l.in_dim {
                    z += l.weights[o * l.in_dim + i] * h[i];
                }
                next[o] = match l.activation {
                    Activation::Tanh => z.tanh(),
                    Activation::Relu => z.max(0.0),
                    Activation::Identity => z,
                };
            }
            h = next;
        }
        let out = net.predict(&x).unwrap();
        for (a, b) in out.iter().zip(&h) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = Mlp::<f64>::dense(3, &[4], 2, Activation::Tanh, 0.0, 1);
        assert!(matches!(net.forward(&[1.0], DropoutMode::Off), Err(Error::Shape { .. })));
        let cache = net.forward(&[1.0, 2.0, 3.0], DropoutMode::Off).unwrap();
        assert!(net.backward(&cache, &[1.0]).is_err());
    }

    #[test]
    fn scalar_tanh_gradient_at_zero_weight() {
        let net = Mlp::from_layers(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            activation: Activation::Tanh,
            dropout: 0.0,
            weights: vec![0.0],
            bias: vec![0.0],
        }])
        .unwrap();
        let cache = net.forward(&[1.0], DropoutMode::Off).unwrap();
        let (g, _) = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.weights[0][0], 1.0);
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradient() {
        let net = random_net(&[4, 6, 3], Activation::Relu, 3);
        let cache = net.forward(&[0.1, 0.2, -0.3, 0.4], DropoutMode::Off).unwrap();
        let (g, d_in) = net.backward(&cache, &[0.0; 3]).unwrap();
        assert!(g.flatten().iter().all(|&x| x == 0.0));
        assert!(d_in.iter().all(|&x| x == 0.0));
    }

    /// Central finite differences of `0.5 * |f(x)|^2 ... ` projected on a fixed
    /// random cotangent, compared against the analytic gradient.
    fn max_rel_err(net: &Mlp<f64>, x: &[f64], cot: &[f64], drop: DropoutMode) -> f64 {
        let cache = net.forward(x, drop).unwrap();
        let (g, d_in) = net.backward(&cache, cot).unwrap();
        let objective = |n: &Mlp<f64>, x: &[f64]| -> f64 {
            let y = n.forward(x, drop).unwrap().output;
            y.iter().zip(cot).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        let mut worst: f64 = 0.0;
        let analytic = g.flatten();
        let mut idx = 0;
        let mut probe = net.clone();
        let n_tensors = probe.tensors().count();
        for t in 0..n_tensors {
            let len = probe.tensors().nth(t).unwrap().len();
            for k in 0..len {
                let orig = probe.tensors().nth(t).unwrap()[k];
                probe.tensors_mut().nth(t).unwrap()[k] = orig + h;
                let fp = objective(&probe, x);
                probe.tensors_mut().nth(t).unwrap()[k] = orig - h;
                let fm = objective(&probe, x);
                probe.tensors_mut().nth(t).unwrap()[k] = orig;
                worst = worst.max(rel(analytic[idx], (fp - fm) / (2.0 * h)));
                idx += 1;
            }
        }
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += h;
            let mut xm = x.to_vec();
            xm[i] -= h;
            worst = worst.max(rel(d_in[i], (objective(net, &xp) - objective(net, &xm)) / (2.0 * h)));
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences_across_shapes() {
        let shapes: [&[usize]; 4] = [&[3, 2], &[4, 8, 3], &[8, 16, 8], &[5, 6, 7, 2]];
        for seed in 0..100u64 {
            let shape = shapes[(seed % 4) as usize];
            for act in [Activation::Tanh, Activation::Relu, Activation::Identity] {
                let net = random_net(shape, act, seed);
                let mut rng = rng_from(seed, &[99]);
                let x: Vec<f64> = (0..shape[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
                let cot: Vec<f64> = (0..*shape.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let err = max_rel_err(&net, &x, &cot, DropoutMode::Off);
                assert!(err < 1e-4, "seed {seed} {act:?} {shape:?}: {err}");
            }
        }
    }

    #[test]
    fn gradients_through_sampled_dropout_masks() {
        let specs = [
            LayerSpec { out_dim: 8, activation: Activation::Tanh, dropout: 0.3 },
            LayerSpec { out_dim: 2, activation: Activation::Identity, dropout: 0.0 },
        ];
        let net = Mlp::<f64>::new(4, &specs, 5);
        let err = max_rel_err(&net, &[0.1, -0.4, 0.9, 0.2], &[1.0, -0.5], DropoutMode::Sample(42));
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn dropout_off_is_the_mean_of_sampled_passes() {
        let specs = [
            LayerSpec { out_dim: 16, activation: Activation::Tanh, dropout: 0.2 },
            LayerSpec { out_dim: 2, activation: Activation::Identity, dropout: 0.0 },
        ];
        let mut net = Mlp::<f64>::new(3, &specs, 9);
        net.layers_mut()[1].bias = vec![0.5, -0.5];
        let x = [0.4, -0.2, 0.7];
        let off = net.predict(&x).unwrap();
        let n = 10_000;
        let mut mean = [0.0; 2];
        for s in 0..n {
            let y = net.forward(&x, DropoutMode::Sample(s)).unwrap().output;
            mean[0] += y[0] / n as f64;
            mean[1] += y[1] / n as f64;
        }
        for i in 0..2 {
            assert!((mean[i] - off[i]).abs() <= 0.01 * off[i].abs(), "{mean:?} vs {off:?}");
        }
    }

    #[test]
    fn sampled_dropout_is_deterministic_per_seed() {
        let net = Mlp::<f64>::dense(3, &[16], 2, Activation::Tanh, 0.5, 2);
        let a = net.forward(&[1.0, 2.0, 3.0], DropoutMode::Sample(4)).unwrap().output;
        let b = net.forward(&[1.0, 2.0, 3.0], DropoutMode::Sample(4)).unwrap().output;
        let c = net.forward(&[1.0, 2.0, 3.0], DropoutMode::Sample(5)).unwrap().output;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn works_in_single_precision() {
        let net = Mlp::<f32>::dense(2, &[8], 1, Activation::Tanh, 0.0, 3);
        let cache = net.forward(&[0.5, -0.5], DropoutMode::Off).unwrap();
        let (g, _) = net.backward(&cache, &[1.0]).unwrap();
        assert!(g.is_finite());
    }
}
