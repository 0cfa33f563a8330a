use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::NeuralError;
use crate::rng::{SplitMix64, INIT_STREAM};

/// Feedforward network: affine + tanh on every hidden layer, affine output.
///
/// Layer `l` maps `layer_sizes[l]` inputs to `layer_sizes[l + 1]` outputs with a
/// `fan_out x fan_in` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Parameter gradients, shape-congruent with the network that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Per-layer activations of a batch forward pass, kept for backpropagation.
/// `activations[0]` is the input; the last entry is the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<(), NeuralError> {
    if layer_sizes.len() < 2 {
        return Err(NeuralError::InvalidLayers(format!(
            "need at least 2 layer sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(NeuralError::InvalidLayers(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self, NeuralError> {
        validate_sizes(layer_sizes)?;
        let mut rng = SplitMix64::for_stream(seed, INIT_STREAM);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.uniform(-bound, bound)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Assemble from explicit parameters, checking every shape and value.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self, NeuralError> {
        validate_sizes(&layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(NeuralError::Shape(format!(
                "{layers} layers need {layers} weight matrices and bias vectors, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            let expected = (layer_sizes[l + 1], layer_sizes[l]);
            if w.dim() != expected || b.len() != expected.0 {
                return Err(NeuralError::Shape(format!(
                    "layer {l}: weights {:?} and bias {} do not match {expected:?}",
                    w.dim(),
                    b.len()
                )));
            }
            if w.iter().chain(b.iter()).any(|x| !x.is_finite()) {
                return Err(NeuralError::NonFinite(format!("layer {l} parameters")));
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    /// `sum_l (fan_out * fan_in + fan_out)`.
    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|p| p[1] * p[0] + p[1]).sum()
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// Inverse of [`Mlp::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        if flat.len() != self.param_count() {
            return Err(NeuralError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x = it.next().unwrap());
        }
        Ok(())
    }

    fn check_batch(&self, x: &ArrayView2<'_, f64>) -> Result<(), NeuralError> {
        if x.ncols() != self.input_dim() {
            return Err(NeuralError::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.forward_batch(batch)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass over a batch with one sample per row.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, NeuralError> {
        self.check_batch(&x)?;
        let last = self.num_layers() - 1;
        let mut a = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(f64::tanh);
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache, NeuralError> {
        self.check_batch(&x)?;
        let last = self.num_layers() - 1;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Reverse-mode pass. `upstream` holds d(loss)/d(output) per sample; the
    /// returned gradients are summed over the batch, and the second value is
    /// d(loss)/d(input) per sample.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>), NeuralError> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(NeuralError::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let layers = self.num_layers();
        let mut grad_w = Vec::with_capacity(layers);
        let mut grad_b = Vec::with_capacity(layers);
        let mut delta = upstream.to_owned();
        for l in (0..layers).rev() {
            let a_prev = &cache.activations[l];
            grad_w.push(delta.t().dot(a_prev));
            grad_b.push(delta.sum_axis(Axis(0)));
            let mut d_prev = delta.dot(&self.weights[l]);
            if l > 0 {
                // a_prev = tanh(z_prev), so d tanh = 1 - a_prev^2
                Zip::from(&mut d_prev)
                    .and(a_prev)
                    .for_each(|d, &a| *d *= 1.0 - a * a);
            }
            delta = d_prev;
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
            delta,
        ))
    }

    /// Gradients of `upstream . output` for a single input.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>), NeuralError> {
        let xb = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        let ub = ArrayView2::from_shape((1, upstream.len()), upstream).expect("contiguous slice");
        let cache = self.forward_cached(xb)?;
        let (grads, dx) = self.backward_batch(&cache, ub)?;
        Ok((grads, dx.into_raw_vec_and_offset().0))
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn matches(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self.weights.iter().zip(&net.weights).all(|(g, w)| g.dim() == w.dim())
            && self.biases.iter().zip(&net.biases).all(|(g, b)| g.len() == b.len())
    }

    /// Element-wise `self += other`.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    /// Same ordering as [`Mlp::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}
