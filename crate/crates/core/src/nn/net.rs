use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

/// One affine layer: `out = input · weights + bias`, weights stored `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense { weights: Array2::zeros((fan_in, fan_out)), bias: Array1::zeros(fan_out) }
    }
}

/// Feed-forward net: ReLU on every hidden layer, a single linear logit out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    dims: Vec<usize>,
    layers: Vec<Dense>,
}

/// Per-layer gradients, shaped like the network that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Dense>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNet) -> Self {
        GradientSet { layers: net.dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() }
    }

    pub fn is_congruent(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len())
    }

    /// All entries, weights then bias, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

/// Activations saved by [`DenseNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is the batch itself).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Array2<f64>>,
}

pub fn init_network(dims: &[usize], seed: u64) -> Result<DenseNet, NnError> {
    DenseNet::new(dims, seed)
}

impl DenseNet {
    /// Seeded fan-in-scaled uniform weights, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`; zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self, NnError> {
        validate_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound);
                let weights = Array2::from_shape_simple_fn((w[0], w[1]), || dist.sample(&mut rng));
                Dense { weights, bias: Array1::zeros(w[1]) }
            })
            .collect();
        Ok(DenseNet { dims: dims.to_vec(), layers })
    }

    /// Network with every parameter zero.
    pub fn zeros(dims: &[usize]) -> Result<Self, NnError> {
        validate_dims(dims)?;
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(DenseNet { dims: dims.to_vec(), layers })
    }

    /// Builds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NnError> {
        let mut dims = Vec::with_capacity(layers.len() + 1);
        for (i, l) in layers.iter().enumerate() {
            let (fan_in, fan_out) = l.weights.dim();
            if i == 0 {
                dims.push(fan_in);
            } else if dims[i] != fan_in {
                return Err(NnError::ShapeMismatch(format!("layer {i} expects {fan_in} inputs, previous emits {}", dims[i])));
            }
            if l.bias.len() != fan_out {
                return Err(NnError::ShapeMismatch(format!("layer {i} bias has {} entries, expected {fan_out}", l.bias.len())));
            }
            dims.push(fan_out);
        }
        validate_dims(&dims)?;
        Ok(DenseNet { dims, layers })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, in the same order as [`GradientSet::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub(crate) fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.weights.len() {
                let cols = l.weights.ncols();
                return &mut l.weights[[k / cols, k % cols]];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return &mut l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Logits for every row of `x`, plus the activations backward needs.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array1<f64>, ForwardCache), NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::ShapeMismatch(format!("input has {} columns, net expects {}", x.ncols(), self.input_dim())));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights) + &layer.bias;
            let next = if i == last { z.clone() } else { z.mapv(relu) };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        let logits = a.index_axis_move(Axis(1), 0);
        Ok((logits, ForwardCache { inputs, pre }))
    }

    /// Logits only.
    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, NnError> {
        self.forward(x).map(|(l, _)| l)
    }

    /// Exact gradients of a scalar loss given `dL/dlogit` for each row.
    ///
    /// Returns parameter gradients and the gradient with respect to the input
    /// batch.
    pub fn backward(&self, cache: &ForwardCache, dlogit: ArrayView1<f64>) -> Result<(GradientSet, Array2<f64>), NnError> {
        if cache.inputs.len() != self.layers.len() || cache.pre.len() != self.layers.len() {
            return Err(NnError::StaleCache(format!("cache has {} layers, net has {}", cache.inputs.len(), self.layers.len())));
        }
        let rows = cache.inputs[0].nrows();
        for (i, (inp, z)) in cache.inputs.iter().zip(&cache.pre).enumerate() {
            let (fan_in, fan_out) = self.layers[i].weights.dim();
            if inp.ncols() != fan_in || z.ncols() != fan_out || inp.nrows() != rows || z.nrows() != rows {
                return Err(NnError::StaleCache(format!("layer {i} activations do not match the network")));
            }
        }
        if dlogit.len() != rows {
            return Err(NnError::StaleCache(format!("upstream gradient has {} rows, cache has {rows}", dlogit.len())));
        }

        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = dlogit.to_owned().insert_axis(Axis(1));
        for i in (0..self.layers.len()).rev() {
            if i != last {
                // ReLU'(0) = 0
                delta.zip_mut_with(&cache.pre[i], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let weights = cache.inputs[i].t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            let upstream = delta.dot(&self.layers[i].weights.t());
            grads.push(Dense { weights, bias });
            delta = upstream;
        }
        grads.reverse();
        Ok((GradientSet { layers: grads }, delta))
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn validate_dims(dims: &[usize]) -> Result<(), NnError> {
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) || *dims.last().unwrap() != 1 {
        return Err(NnError::InvalidDims(dims.to_vec()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{bce_loss, numeric_gradient, sigmoid};
    use ndarray::array;
    use rand::Rng;

    /// Straight-line forward pass with explicit loops.
    fn naive_logits(net: &DenseNet, x: &Array2<f64>) -> Vec<f64> {
        let last = net.layers.len() - 1;
        x.outer_iter()
            .map(|row| {
                let mut a: Vec<f64> = row.to_vec();
                for (i, layer) in net.layers.iter().enumerate() {
                    let (fan_in, fan_out) = layer.weights.dim();
                    let mut next = vec![0.0; fan_out];
                    for (o, out) in next.iter_mut().enumerate() {
                        let mut s = layer.bias[o];
                        for k in 0..fan_in {
                            s += a[k] * layer.weights[[k, o]];
                        }
                        *out = if i == last || s > 0.0 { s } else { 0.0 };
                    }
                    a = next;
                }
                a[0]
            })
            .collect()
    }

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(init_network(&[7, 256, 256, 1], 0).unwrap().param_count(), 68_097);
        assert_eq!(init_network(&[1, 100, 1], 0).unwrap().param_count(), 301);
        assert_eq!(init_network(&[2, 100, 1], 0).unwrap().param_count(), 401);
    }

    #[test]
    fn invalid_dims() {
        for dims in [vec![3], vec![3, 0, 1], vec![3, 4], vec![]] {
            assert!(matches!(init_network(&dims, 0), Err(NnError::InvalidDims(_))));
        }
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = init_network(&[10, 16, 1], 9).unwrap();
        assert_eq!(a, init_network(&[10, 16, 1], 9).unwrap());
        assert_ne!(a, init_network(&[10, 16, 1], 10).unwrap());
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let bound = (6.0f64 / 10.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn zero_network_gives_half() {
        let net = DenseNet::zeros(&[4, 8, 1]).unwrap();
        let logits = net.logits(random_batch(5, 4, 1).view()).unwrap();
        assert!(logits.iter().all(|&l| l == 0.0 && sigmoid(l) == 0.5));
    }

    #[test]
    fn identity_layer() {
        let net = DenseNet::from_layers(vec![Dense { weights: array![[1.0]], bias: array![0.0] }]).unwrap();
        let logits = net.logits(array![[0.3], [-2.5]].view()).unwrap();
        assert_eq!(logits.to_vec(), vec![0.3, -2.5]);
    }

    #[test]
    fn matches_naive_forward() {
        let net = init_network(&[6, 12, 7, 1], 42).unwrap();
        let x = random_batch(9, 6, 43);
        let got = net.logits(x.view()).unwrap();
        for (g, want) in got.iter().zip(naive_logits(&net, &x)) {
            assert!((g - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn forward_shape_mismatch() {
        let net = init_network(&[3, 4, 1], 0).unwrap();
        assert!(matches!(net.forward(random_batch(2, 5, 0).view()), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = init_network(&[3, 4, 1], 0).unwrap();
        let b = init_network(&[3, 5, 1], 0).unwrap();
        let (_, cache) = a.forward(random_batch(2, 3, 0).view()).unwrap();
        assert!(matches!(b.backward(&cache, array![1.0, 1.0].view()), Err(NnError::StaleCache(_))));
        assert!(matches!(a.backward(&cache, array![1.0].view()), Err(NnError::StaleCache(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = init_network(&[3, 8, 1], 5).unwrap();
        let (_, cache) = net.forward(random_batch(4, 3, 6).view()).unwrap();
        let (g, dx) = net.backward(&cache, Array1::zeros(4).view()).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        // hidden pre-activation exactly 0 for the single row
        let net = DenseNet::from_layers(vec![
            Dense { weights: array![[1.0]], bias: array![0.0] },
            Dense { weights: array![[2.0]], bias: array![0.5] },
        ])
        .unwrap();
        let (_, cache) = net.forward(array![[0.0]].view()).unwrap();
        let (g, dx) = net.backward(&cache, array![1.0].view()).unwrap();
        assert_eq!(g.layers[0].weights[[0, 0]], 0.0);
        assert_eq!(g.layers[0].bias[0], 0.0);
        assert_eq!(dx[[0, 0]], 0.0);
        assert_eq!(g.layers[1].bias[0], 1.0);
    }

    #[test]
    fn bce_head_gradient_matches_finite_differences() {
        let net = init_network(&[5, 9, 1], 11).unwrap();
        let x = random_batch(7, 5, 12);
        let y = array![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let (logits, cache) = net.forward(x.view()).unwrap();
        let n = y.len() as f64;
        let dlogit = (logits.mapv(sigmoid) - &y) / n;
        let (g, _) = net.backward(&cache, dlogit.view()).unwrap();
        let num = numeric_gradient(
            |candidate: &DenseNet| bce_loss(candidate.logits(x.view()).unwrap().mapv(sigmoid).view(), y.view()).unwrap(),
            &net,
            1e-6,
        )
        .unwrap();
        for (a, b) in g.flatten().iter().zip(num.flatten()) {
            let denom = a.abs().max(b.abs()).max(1e-8);
            assert!((a - b).abs() / denom <= 1e-5 || (a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = init_network(&[2, 6, 1], 3).unwrap();
        let x = random_batch(3, 2, 4);
        let w = array![0.3, -1.2, 0.7];
        let (_, cache) = net.forward(x.view()).unwrap();
        let (_, dx) = net.backward(&cache, w.view()).unwrap();
        let h = 1e-6;
        for r in 0..3 {
            for c in 0..2 {
                let mut plus = x.clone();
                plus[[r, c]] += h;
                let mut minus = x.clone();
                minus[[r, c]] -= h;
                let f = |m: &Array2<f64>| net.logits(m.view()).unwrap().dot(&w);
                let num = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!((num - dx[[r, c]]).abs() < 1e-7);
            }
        }
    }
}
