//! Importance-sampled soft state values.
//!
//! The soft value `V(s) = α·log ∫ exp(Q(s,a')/α) da'` is estimated with
//! `k_v` proposal draws:
//!
//! ```text
//! V̂(s) = α·log[ (1/k_v)·Σ_i exp(Q(s,a'_i)/α) / q(a'_i) ],
//! ```
//!
//! computed max-shifted in log space. The estimator is unbiased before the
//! log. Proposals are either uniform over the action box (exact density
//! `2^{-d}`) or the sampling network with change-of-variables densities;
//! a state whose sampler Jacobian is singular falls back to uniform and is
//! counted.

use rand::Rng as _;

use crate::error::{Result, SoftqError};
use crate::qnet::SoftQFunction;
use crate::rng::Rng;
use crate::svgd::{log_density_from_jacobian, noise_jacobians, SamplerNetwork};
use crate::tensor::Tensor;

/// Proposal distribution for the soft-value estimator.
#[derive(Clone, Copy)]
pub enum Proposal<'a> {
    /// Uniform over `[-1, 1]^d`.
    UniformBox,
    /// Actions from the sampling network, weighted by their pushforward
    /// density.
    Sampler(&'a SamplerNetwork),
}

/// Result of [`estimate_soft_value`].
#[derive(Debug, Clone)]
pub struct SoftValueEstimate {
    /// One soft value per input state.
    pub values: Vec<f64>,
    /// States whose sampler proposal was unusable (singular Jacobian) and
    /// fell back to the uniform proposal.
    pub fallbacks: usize,
}

/// Draws `[n×d]` rows uniform over the action box.
pub fn draw_uniform_box(n: usize, dim: usize, rng: &mut Rng) -> Tensor {
    let data: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Tensor::from_vec(&[n, dim], data).expect("uniform tensor")
}

/// Estimates `V(s)` for every row of `states` with `k_v` proposal draws.
pub fn estimate_soft_value(
    q: &dyn SoftQFunction,
    states: &Tensor,
    proposal: Proposal<'_>,
    alpha: f64,
    k_v: usize,
    rng: &mut Rng,
) -> Result<SoftValueEstimate> {
    if k_v < 1 {
        return Err(SoftqError::invalid("k_v must be ≥ 1"));
    }
    if !(alpha > 0.0) {
        return Err(SoftqError::invalid("alpha must be > 0"));
    }
    if states.cols() != q.state_dim() {
        return Err(SoftqError::invalid("state batch dim mismatch"));
    }
    let n = states.rows();
    let d = q.action_dim();
    let log_uniform_density = -(d as f64) * std::f64::consts::LN_2;

    let rep_states = {
        let mut t = Tensor::zeros(&[n * k_v, q.state_dim()]);
        for s in 0..n {
            for r in 0..k_v {
                t.row_mut(s * k_v + r).copy_from_slice(states.row(s));
            }
        }
        t
    };

    // Per-sample log proposal densities, or None where unusable.
    let (actions, log_densities): (Tensor, Vec<Option<f64>>) = match proposal {
        Proposal::UniformBox => {
            let actions = draw_uniform_box(n * k_v, d, rng);
            (actions, vec![Some(log_uniform_density); n * k_v])
        }
        Proposal::Sampler(net) => {
            if net.state_dim != q.state_dim() || net.action_dim != d {
                return Err(SoftqError::invalid("sampler dims do not match Q-network"));
            }
            let noise = crate::svgd::draw_noise(n * k_v, d, rng);
            let input = Tensor::hcat(&rep_states, &noise);
            let actions = crate::nn::mlp_forward(&net.params, &input)?;
            let jacobians = noise_jacobians(net, &rep_states, &noise)?;
            let log_d: Vec<Option<f64>> = (0..n * k_v)
                .map(|r| log_density_from_jacobian(noise.row(r), &jacobians[r], d))
                .collect();
            (actions, log_d)
        }
    };

    let q_vals = q.q_values(&rep_states, &actions)?;

    let mut values = Vec::with_capacity(n);
    let mut fallbacks = 0;
    let ln_k = (k_v as f64).ln();
    for s in 0..n {
        let block = s * k_v..(s + 1) * k_v;
        let usable = log_densities[block.clone()].iter().all(Option::is_some);
        let exponents: Vec<f64> = if usable {
            q_vals[block.clone()]
                .iter()
                .zip(&log_densities[block])
                .map(|(&qv, ld)| qv / alpha - ld.expect("usable"))
                .collect()
        } else {
            // Singular Jacobian somewhere in this state's draw: redo the
            // state with the uniform proposal.
            fallbacks += 1;
            let uniform_actions = draw_uniform_box(k_v, d, rng);
            let state_rep = {
                let mut t = Tensor::zeros(&[k_v, q.state_dim()]);
                for r in 0..k_v {
                    t.row_mut(r).copy_from_slice(states.row(s));
                }
                t
            };
            let qs = q.q_values(&state_rep, &uniform_actions)?;
            qs.iter()
                .map(|&qv| qv / alpha - log_uniform_density)
                .collect()
        };
        let m = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exponents.iter().map(|&z| (z - m).exp()).sum();
        values.push(alpha * (m + sum.ln() - ln_k));
    }
    Ok(SoftValueEstimate { values, fallbacks })
}
