//! Dense multilayer perceptrons with hand-rolled reverse-mode gradients.
//!
//! The topology is fixed to what the agent needs: affine layers with ReLU
//! hidden activations and an identity or tanh output. `mlp_backward` returns
//! exact gradients of the forward map contracted with an output cotangent;
//! the cached variants avoid recomputing the forward pass inside training
//! loops.

use rand::Rng as _;

use crate::error::{Result, SoftqError};
use crate::rng::Rng;
use crate::tensor::{matmul_a_bt, matmul_at_b, matmul_into, Tensor};

/// Output nonlinearity. Hidden layers are always ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

/// One affine layer; `weight` is `[in × out]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Vec<f64>,
}

/// Parameter bundle for a fixed-topology MLP.
///
/// Also doubles as the gradient container: gradients of an MLP are
/// `MlpParams`-shaped.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub output_activation: Activation,
}

impl MlpParams {
    /// Seeded initialization: weights uniform in `[-1/√fan_in, +1/√fan_in]`,
    /// biases zero. `dims` chains input, hidden widths, and output.
    pub fn init(dims: &[usize], output_activation: Activation, rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            layers.push(Layer {
                weight: Tensor::from_vec(&[fan_in, fan_out], data).expect("init weight"),
                bias: vec![0.0; fan_out],
            });
        }
        MlpParams {
            layers,
            output_activation,
        }
    }

    /// The production topology: two hidden layers of 200 units.
    pub fn two_hidden_200(
        in_dim: usize,
        out_dim: usize,
        output_activation: Activation,
        rng: &mut Rng,
    ) -> Self {
        Self::init(&[in_dim, 200, 200, out_dim], output_activation, rng)
    }

    /// Same shapes, all parameters zero. Gradient accumulators start here.
    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Tensor::zeros(l.weight.shape()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            output_activation: self.output_activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().expect("empty MLP").weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("empty MLP").weight.cols()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Largest absolute parameter value.
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(&l.bias))
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }

    /// Checks that `other` has identical layer shapes.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.shape() == b.weight.shape() && a.bias.len() == b.bias.len())
    }

    /// `self += factor · other`, elementwise over all parameters.
    pub fn scaled_add(&mut self, other: &Self, factor: f64) {
        assert!(self.same_shape(other), "scaled_add shape mismatch");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += factor * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += factor * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for x in l.weight.data_mut() {
                *x *= factor;
            }
            for x in &mut l.bias {
                *x *= factor;
            }
        }
    }
}

/// Post-activation values of every layer, plus the input at index 0.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub activations: Vec<Tensor>,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("empty cache")
    }
}

fn check_input(params: &MlpParams, input: &Tensor) -> Result<()> {
    if input.shape().len() != 2 || input.cols() != params.in_dim() {
        return Err(SoftqError::invalid(format!(
            "input shape {:?} does not match network input width {}",
            input.shape(),
            params.in_dim()
        )));
    }
    Ok(())
}

/// Forward pass, keeping every layer's post-activation for a later backward.
pub fn mlp_forward_cached(params: &MlpParams, input: &Tensor) -> Result<ForwardCache> {
    check_input(params, input)?;
    let batch = input.rows();
    let n_layers = params.layers.len();
    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(input.clone());
    for (li, layer) in params.layers.iter().enumerate() {
        let mut z = Tensor::zeros(&[batch, layer.weight.cols()]);
        matmul_into(&activations[li], &layer.weight, &mut z);
        let last = li + 1 == n_layers;
        for r in 0..batch {
            let row = z.row_mut(r);
            for (x, b) in row.iter_mut().zip(&layer.bias) {
                *x += b;
            }
            if !last {
                for x in row.iter_mut() {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
            } else if params.output_activation == Activation::Tanh {
                for x in row.iter_mut() {
                    *x = x.tanh();
                }
            }
        }
        activations.push(z);
    }
    Ok(ForwardCache { activations })
}

/// Forward pass: affine → ReLU → … → affine (plus optional tanh).
pub fn mlp_forward(params: &MlpParams, input: &Tensor) -> Result<Tensor> {
    let cache = mlp_forward_cached(params, input)?;
    Ok(cache.activations.into_iter().last().expect("output"))
}

/// Reverse-mode pass from a forward cache.
///
/// `cotangent` is `∂L/∂output`; returns parameter gradients (if requested)
/// and the gradient with respect to the input (if requested). The ReLU
/// subgradient at exactly 0 is 0.
pub fn mlp_backward_cached(
    params: &MlpParams,
    cache: &ForwardCache,
    cotangent: &Tensor,
    want_param_grads: bool,
    want_input_grads: bool,
) -> Result<(Option<MlpParams>, Option<Tensor>)> {
    let n_layers = params.layers.len();
    if cache.activations.len() != n_layers + 1 {
        return Err(SoftqError::invalid("forward cache does not match network"));
    }
    let batch = cache.activations[0].rows();
    if cotangent.shape() != [batch, params.out_dim()] {
        return Err(SoftqError::invalid(format!(
            "cotangent shape {:?}, expected [{batch}, {}]",
            cotangent.shape(),
            params.out_dim()
        )));
    }

    // Output activation derivative from the post-activation value:
    // tanh'(z) = 1 - y².
    let mut delta = cotangent.clone();
    if params.output_activation == Activation::Tanh {
        let y = cache.output();
        for (d, &yv) in delta.data_mut().iter_mut().zip(y.data()) {
            *d *= 1.0 - yv * yv;
        }
    }

    let mut grads = want_param_grads.then(|| params.zeros_like());
    for li in (0..n_layers).rev() {
        let x_prev = &cache.activations[li];
        if let Some(g) = grads.as_mut() {
            matmul_at_b(x_prev, &delta, 0.0, &mut g.layers[li].weight);
            let db = &mut g.layers[li].bias;
            for r in 0..batch {
                for (acc, d) in db.iter_mut().zip(delta.row(r)) {
                    *acc += d;
                }
            }
        }
        if li == 0 && !want_input_grads {
            return Ok((grads, None));
        }
        let mut dx = Tensor::zeros(&[batch, params.layers[li].weight.rows()]);
        matmul_a_bt(&delta, &params.layers[li].weight, &mut dx);
        if li > 0 {
            // ReLU mask: post-activation > 0 iff pre-activation > 0.
            for (d, &x) in dx.data_mut().iter_mut().zip(x_prev.data()) {
                if x <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        delta = dx;
    }
    Ok((grads, Some(delta)))
}

/// Exact reverse-mode gradients of the forward map contracted with
/// `cotangent`: parameter gradients and input gradients.
pub fn mlp_backward(
    params: &MlpParams,
    input: &Tensor,
    cotangent: &Tensor,
) -> Result<(MlpParams, Tensor)> {
    let cache = mlp_forward_cached(params, input)?;
    let (grads, input_grads) = mlp_backward_cached(params, &cache, cotangent, true, true)?;
    Ok((grads.expect("param grads"), input_grads.expect("input grads")))
}

/// ADAM optimizer state: first/second-moment accumulators and step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: MlpParams,
    v: MlpParams,
}

impl AdamState {
    /// Fresh state for `params` with the standard coefficients
    /// β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(params: &MlpParams, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One bias-corrected ADAM update, in place.
pub fn adam_step(state: &mut AdamState, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(SoftqError::invalid("adam_step shape mismatch"));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);

    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for (li, layer) in params.layers.iter_mut().enumerate() {
        let gl = &grads.layers[li];
        let ml = &mut state.m.layers[li];
        let vl = &mut state.v.layers[li];
        for (((p, &g), m), v) in layer
            .weight
            .data_mut()
            .iter_mut()
            .zip(gl.weight.data())
            .zip(ml.weight.data_mut())
            .zip(vl.weight.data_mut())
        {
            update(p, g, m, v);
        }
        for (((p, &g), m), v) in layer
            .bias
            .iter_mut()
            .zip(&gl.bias)
            .zip(ml.bias.iter_mut())
            .zip(vl.bias.iter_mut())
        {
            update(p, g, m, v);
        }
    }
    Ok(())
}
