//! Soft Q-function interface and its MLP-backed implementation.

use crate::error::{Result, SoftqError};
use crate::nn::{mlp_backward_cached, mlp_forward, mlp_forward_cached, Activation, MlpParams};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Anything that can evaluate `Q(s, a)` and its action gradient.
///
/// Implemented by [`QNetwork`] for training and by analytic closures in
/// tests, so estimators can be checked against quadrature ground truth.
pub trait SoftQFunction {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;

    /// `Q(s_i, a_i)` for paired rows of `states: [n×ds]` and `actions: [n×da]`.
    fn q_values(&self, states: &Tensor, actions: &Tensor) -> Result<Vec<f64>>;

    /// `∇_a Q(s_i, a_i)` per row; returns `[n×da]`.
    fn q_action_grads(&self, states: &Tensor, actions: &Tensor) -> Result<Tensor>;
}

/// The soft Q-function approximator: an MLP over `[state | action]` rows
/// with a scalar identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub params: MlpParams,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl QNetwork {
    /// Production topology: two hidden layers of 200 ReLU units.
    pub fn new(state_dim: usize, action_dim: usize, rng: &mut Rng) -> Self {
        let params =
            MlpParams::two_hidden_200(state_dim + action_dim, 1, Activation::Identity, rng);
        QNetwork {
            params,
            state_dim,
            action_dim,
        }
    }

    /// Wraps existing parameters, checking the input/output widths.
    pub fn from_params(params: MlpParams, state_dim: usize, action_dim: usize) -> Result<Self> {
        if params.in_dim() != state_dim + action_dim || params.out_dim() != 1 {
            return Err(SoftqError::invalid(
                "parameter shapes do not match a Q-network of these dims",
            ));
        }
        Ok(QNetwork {
            params,
            state_dim,
            action_dim,
        })
    }

    fn check_pair(&self, states: &Tensor, actions: &Tensor) -> Result<()> {
        if states.cols() != self.state_dim
            || actions.cols() != self.action_dim
            || states.rows() != actions.rows()
        {
            return Err(SoftqError::invalid(format!(
                "state/action batch {:?}/{:?} does not match Q-network dims ({}, {})",
                states.shape(),
                actions.shape(),
                self.state_dim,
                self.action_dim
            )));
        }
        Ok(())
    }
}

impl SoftQFunction for QNetwork {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn q_values(&self, states: &Tensor, actions: &Tensor) -> Result<Vec<f64>> {
        self.check_pair(states, actions)?;
        let input = Tensor::hcat(states, actions);
        let out = mlp_forward(&self.params, &input)?;
        Ok(out.into_data())
    }

    fn q_action_grads(&self, states: &Tensor, actions: &Tensor) -> Result<Tensor> {
        self.check_pair(states, actions)?;
        let input = Tensor::hcat(states, actions);
        let cache = mlp_forward_cached(&self.params, &input)?;
        let mut cot = Tensor::zeros(&[input.rows(), 1]);
        cot.data_mut().fill(1.0);
        let (_, input_grads) = mlp_backward_cached(&self.params, &cache, &cot, false, true)?;
        let input_grads = input_grads.expect("input grads");
        Ok(input_grads.col_slice(self.state_dim, self.state_dim + self.action_dim))
    }
}
