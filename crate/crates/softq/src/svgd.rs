//! Stein variational gradient machinery and the amortized sampling network.
//!
//! The sampling network `a = f(ξ; s)` pushes standard normal noise through
//! an MLP to approximate samples of the energy-based policy
//! `π(a|s) ∝ exp(Q(s,a)/α)`. Particles are steered by the Stein direction
//!
//! ```text
//! Δf(ã) = (1/M)·Σ_i [ κ(a_i, ã)·∇_a Q(s, a_i) + α·∇_{a_i} κ(a_i, ã) ],
//! ```
//!
//! and the direction is backpropagated through `f` to give the policy
//! update. Ascending the returned gradient reduces the KL divergence
//! between the pushforward and the policy.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Result, SoftqError};
use crate::nn::{mlp_backward_cached, mlp_forward, mlp_forward_cached, Activation, MlpParams};
use crate::qnet::SoftQFunction;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Floor for the RBF bandwidth when particles collapse.
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// RBF bandwidth from the median heuristic:
/// `h = med/(2·ln(M+1))` with `med` the median of the `M(M−1)/2` pairwise
/// squared distances, floored at [`BANDWIDTH_FLOOR`].
pub fn median_bandwidth(actions: &Tensor) -> Result<f64> {
    let m = actions.rows();
    if m < 2 {
        return Err(SoftqError::invalid("median bandwidth needs ≥ 2 particles"));
    }
    let mut sq_dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            let d: f64 = actions
                .row(i)
                .iter()
                .zip(actions.row(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            sq_dists.push(d);
        }
    }
    sq_dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = sq_dists.len();
    let med = if n % 2 == 1 {
        sq_dists[n / 2]
    } else {
        0.5 * (sq_dists[n / 2 - 1] + sq_dists[n / 2])
    };
    let h = med / (2.0 * ((m + 1) as f64).ln());
    Ok(h.max(BANDWIDTH_FLOOR))
}

/// RBF kernel `κ(a,b) = exp(−‖a−b‖²/h)` and its gradient with respect to
/// the first argument, `∇_a κ = −(2/h)(a−b)·κ`.
pub fn rbf_kernel(a: &[f64], b: &[f64], h: f64) -> (f64, Vec<f64>) {
    assert_eq!(a.len(), b.len(), "kernel argument dim mismatch");
    assert!(h > 0.0, "bandwidth must be positive");
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let value = (-sq / h).exp();
    let grad = a
        .iter()
        .zip(b)
        .map(|(x, y)| -(2.0 / h) * (x - y) * value)
        .collect();
    (value, grad)
}

/// One Stein update's worth of particles for a single conditioning state.
#[derive(Debug, Clone)]
pub struct SvgdBatch {
    /// Conditioning state (bookkeeping; the math only sees the particles).
    pub state: Vec<f64>,
    /// Source particles `a_i = f(ξ_i; s)`, `[M×d]`.
    pub actions: Tensor,
    /// Target particles `ã_j = f(ξ̃_j; s)`, `[K×d]`.
    pub tilde_actions: Tensor,
    /// `∇_a Q(s, a)` at each source particle, `[M×d]`.
    pub q_grads: Tensor,
    pub bandwidth: f64,
    pub alpha: f64,
}

impl SvgdBatch {
    pub fn new(
        state: Vec<f64>,
        actions: Tensor,
        tilde_actions: Tensor,
        q_grads: Tensor,
        bandwidth: f64,
        alpha: f64,
    ) -> Result<Self> {
        if actions.rows() < 1 || tilde_actions.rows() < 1 {
            return Err(SoftqError::invalid("need at least one particle per set"));
        }
        if actions.cols() != tilde_actions.cols() {
            return Err(SoftqError::invalid("particle dim mismatch"));
        }
        if q_grads.shape() != actions.shape() {
            return Err(SoftqError::invalid("q_grads shape must match actions"));
        }
        if !(bandwidth > 0.0) {
            return Err(SoftqError::invalid("bandwidth must be > 0"));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(SoftqError::invalid("alpha must be finite and ≥ 0"));
        }
        if !actions.is_finite() || !tilde_actions.is_finite() || !q_grads.is_finite() {
            return Err(SoftqError::invalid("non-finite particle data"));
        }
        Ok(SvgdBatch {
            state,
            actions,
            tilde_actions,
            q_grads,
            bandwidth,
            alpha,
        })
    }
}

/// The Stein direction `Δf(ã_j)` for every target particle; returns `[K×d]`.
///
/// The first term drags targets up the Q landscape, the second (α-weighted)
/// kernel-gradient term repels coincident particles.
pub fn stein_direction(batch: &SvgdBatch) -> Tensor {
    let m = batch.actions.rows();
    let k = batch.tilde_actions.rows();
    let d = batch.actions.cols();
    let inv_m = 1.0 / m as f64;
    let two_over_h = 2.0 / batch.bandwidth;
    let mut out = Tensor::zeros(&[k, d]);
    for j in 0..k {
        let target = batch.tilde_actions.row(j);
        let out_row = out.row_mut(j);
        for i in 0..m {
            let src = batch.actions.row(i);
            let sq: f64 = src
                .iter()
                .zip(target)
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            let kappa = (-sq / batch.bandwidth).exp();
            let qg = batch.q_grads.row(i);
            for dd in 0..d {
                let kernel_grad = -two_over_h * (src[dd] - target[dd]) * kappa;
                out_row[dd] += kappa * qg[dd] + batch.alpha * kernel_grad;
            }
        }
        for x in out_row.iter_mut() {
            *x *= inv_m;
        }
    }
    out
}

/// State-conditioned stochastic sampling network `a = f(ξ; s)`.
///
/// Noise dimension equals the action dimension. The production network uses
/// a tanh output so actions stay inside `(−1, 1)^d`; tests may wrap other
/// topologies (e.g. identity outputs) for change-of-variables checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerNetwork {
    pub params: MlpParams,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl SamplerNetwork {
    /// Production topology: `[state|noise] → 200 → 200 → action`, tanh output.
    pub fn new_tanh_200(state_dim: usize, action_dim: usize, rng: &mut Rng) -> Self {
        let params =
            MlpParams::two_hidden_200(state_dim + action_dim, action_dim, Activation::Tanh, rng);
        SamplerNetwork {
            params,
            state_dim,
            action_dim,
        }
    }

    pub fn from_params(params: MlpParams, state_dim: usize, action_dim: usize) -> Result<Self> {
        if params.in_dim() != state_dim + action_dim || params.out_dim() != action_dim {
            return Err(SoftqError::invalid(
                "parameter shapes do not match a sampler of these dims",
            ));
        }
        Ok(SamplerNetwork {
            params,
            state_dim,
            action_dim,
        })
    }

    /// Noise dimension; always the action dimension.
    pub fn noise_dim(&self) -> usize {
        self.action_dim
    }

    /// Builds the `[n×(ds+da)]` input block for `n` noise rows under one state.
    fn input_block(&self, state: &[f64], noise: &Tensor) -> Tensor {
        let n = noise.rows();
        let mut data = Vec::with_capacity(n * (self.state_dim + self.action_dim));
        for r in 0..n {
            data.extend_from_slice(state);
            data.extend_from_slice(noise.row(r));
        }
        Tensor::from_vec(&[n, self.state_dim + self.action_dim], data).expect("input block")
    }
}

/// Draws `[n×d]` standard normal noise rows.
pub fn draw_noise(n: usize, dim: usize, rng: &mut Rng) -> Tensor {
    let data: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::from_vec(&[n, dim], data).expect("noise tensor")
}

/// `n` i.i.d. actions `f(ξ; state)` with `ξ ∼ N(0, I)`; returns `[n×d]`.
pub fn sample_actions(
    net: &SamplerNetwork,
    state: &[f64],
    n: usize,
    rng: &mut Rng,
) -> Result<Tensor> {
    if state.len() != net.state_dim {
        return Err(SoftqError::invalid("state dim mismatch"));
    }
    if n < 1 {
        return Err(SoftqError::invalid("need n ≥ 1 samples"));
    }
    let noise = draw_noise(n, net.noise_dim(), rng);
    let input = net.input_block(state, &noise);
    mlp_forward(&net.params, &input)
}

/// Jacobians `∂a/∂ξ` for paired rows of `states` and `noises`, computed with
/// one batched backward pass per output coordinate. Returns one row-major
/// `d×d` matrix per row.
pub fn noise_jacobians(
    net: &SamplerNetwork,
    states: &Tensor,
    noises: &Tensor,
) -> Result<Vec<Vec<f64>>> {
    let n = states.rows();
    let d = net.action_dim;
    if states.cols() != net.state_dim || noises.cols() != d || noises.rows() != n {
        return Err(SoftqError::invalid("jacobian batch shape mismatch"));
    }
    let input = Tensor::hcat(states, noises);
    let cache = mlp_forward_cached(&net.params, &input)?;
    let mut jac = vec![vec![0.0; d * d]; n];
    for out_dim in 0..d {
        let mut cot = Tensor::zeros(&[n, d]);
        for r in 0..n {
            cot.row_mut(r)[out_dim] = 1.0;
        }
        let (_, input_grads) = mlp_backward_cached(&net.params, &cache, &cot, false, true)?;
        let input_grads = input_grads.expect("input grads");
        for r in 0..n {
            let noise_part = &input_grads.row(r)[net.state_dim..net.state_dim + d];
            jac[r][out_dim * d..(out_dim + 1) * d].copy_from_slice(noise_part);
        }
    }
    Ok(jac)
}

/// Determinant of a small row-major `d×d` matrix via LU with partial
/// pivoting. Destroys its input.
fn determinant(mat: &mut [f64], d: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..d {
        let mut pivot = col;
        let mut best = mat[col * d + col].abs();
        for r in (col + 1)..d {
            let v = mat[r * d + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..d {
                mat.swap(col * d + c, pivot * d + c);
            }
            det = -det;
        }
        let diag = mat[col * d + col];
        det *= diag;
        for r in (col + 1)..d {
            let factor = mat[r * d + col] / diag;
            for c in col..d {
                mat[r * d + c] -= factor * mat[col * d + c];
            }
        }
    }
    det
}

/// Log-density of the pushforward action `a = f(ξ; s)` at the drawn noise:
/// `log p_ξ(ξ) − log|det ∂a/∂ξ|`.
///
/// Returns `None` when the Jacobian is numerically singular
/// (`|det| < 1e-12`) instead of erroring; callers fall back to a proposal
/// with a known density.
pub fn action_log_density(
    net: &SamplerNetwork,
    state: &[f64],
    noise: &[f64],
) -> Result<Option<f64>> {
    if state.len() != net.state_dim || noise.len() != net.noise_dim() {
        return Err(SoftqError::invalid("state/noise dim mismatch"));
    }
    let states = Tensor::from_vec(&[1, state.len()], state.to_vec())?;
    let noises = Tensor::from_vec(&[1, noise.len()], noise.to_vec())?;
    let jac = noise_jacobians(net, &states, &noises)?;
    Ok(log_density_from_jacobian(noise, &jac[0], net.action_dim))
}

/// Shared tail of the change-of-variables computation.
pub(crate) fn log_density_from_jacobian(noise: &[f64], jac: &[f64], d: usize) -> Option<f64> {
    let mut mat = jac.to_vec();
    let det = determinant(&mut mat, d);
    if det.abs() < 1e-12 {
        return None;
    }
    let log_p_noise = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * noise.iter().map(|x| x * x).sum::<f64>();
    Some(log_p_noise - det.abs().ln())
}

/// Amortized SVGD policy gradient over a state batch.
///
/// For every state, draws fresh noise sets `{ξ_i}_M` and `{ξ̃_j}_K`
/// (one shared set when `shared_noise` is set, which requires `m == k`),
/// forms the Stein direction from the Q-network's action gradients, and
/// chain-rules it through the sampler:
///
/// ```text
/// G = mean_states (1/K)·Σ_j Δf(ã_j)ᵀ·∂f(ξ̃_j; s)/∂φ.
/// ```
///
/// `G` is an ascent direction: stepping `φ += lr·G` reduces the KL between
/// the pushforward and the Boltzmann policy. The overall scale is absorbed
/// by the learning rate.
pub fn amortized_policy_gradient(
    net: &SamplerNetwork,
    states: &Tensor,
    q: &dyn SoftQFunction,
    m: usize,
    k: usize,
    alpha: f64,
    shared_noise: bool,
    rng: &mut Rng,
) -> Result<MlpParams> {
    if m < 1 || k < 1 {
        return Err(SoftqError::invalid("m and k must be ≥ 1"));
    }
    if shared_noise && m != k {
        return Err(SoftqError::invalid("shared noise requires m == k"));
    }
    if states.cols() != net.state_dim {
        return Err(SoftqError::invalid("state batch dim mismatch"));
    }
    if q.state_dim() != net.state_dim || q.action_dim() != net.action_dim {
        return Err(SoftqError::invalid("Q-network dims do not match sampler"));
    }
    let b = states.rows();
    let d = net.action_dim;

    // Noise draw order per state: the M source rows, then the K target rows.
    let mut src_noise = Tensor::zeros(&[b * m, d]);
    let mut tgt_noise = Tensor::zeros(&[b * k, d]);
    for s in 0..b {
        let drawn = draw_noise(m, d, rng);
        for i in 0..m {
            src_noise.row_mut(s * m + i).copy_from_slice(drawn.row(i));
        }
        if shared_noise {
            for j in 0..k {
                tgt_noise.row_mut(s * k + j).copy_from_slice(drawn.row(j));
            }
        } else {
            let drawn_t = draw_noise(k, d, rng);
            for j in 0..k {
                tgt_noise.row_mut(s * k + j).copy_from_slice(drawn_t.row(j));
            }
        }
    }

    let rep_states = |reps: usize| {
        let mut t = Tensor::zeros(&[b * reps, net.state_dim]);
        for s in 0..b {
            for r in 0..reps {
                t.row_mut(s * reps + r).copy_from_slice(states.row(s));
            }
        }
        t
    };
    let src_states = rep_states(m);
    let tgt_states = rep_states(k);

    let src_actions = mlp_forward(&net.params, &Tensor::hcat(&src_states, &src_noise))?;
    let tgt_input = Tensor::hcat(&tgt_states, &tgt_noise);
    let tgt_cache = mlp_forward_cached(&net.params, &tgt_input)?;
    let tgt_actions = tgt_cache.output().clone();

    let q_grads = q.q_action_grads(&src_states, &src_actions)?;

    // Stein direction per state, assembled into one cotangent for a single
    // batched backward through the sampler.
    let mut cot = Tensor::zeros(&[b * k, d]);
    let norm = 1.0 / (b * k) as f64;
    for s in 0..b {
        let take = |t: &Tensor, off: usize, n: usize| {
            let mut block = Tensor::zeros(&[n, d]);
            for r in 0..n {
                block.row_mut(r).copy_from_slice(t.row(off + r));
            }
            block
        };
        let actions_s = take(&src_actions, s * m, m);
        let bandwidth = if m >= 2 {
            median_bandwidth(&actions_s)?
        } else {
            1.0
        };
        let batch = SvgdBatch::new(
            states.row(s).to_vec(),
            actions_s,
            take(&tgt_actions, s * k, k),
            take(&q_grads, s * m, m),
            bandwidth,
            alpha,
        )?;
        let delta = stein_direction(&batch);
        for j in 0..k {
            for dd in 0..d {
                cot.row_mut(s * k + j)[dd] = delta.at(j, dd) * norm;
            }
        }
    }

    let (grads, _) = mlp_backward_cached(&net.params, &tgt_cache, &cot, true, false)?;
    Ok(grads.expect("param grads"))
}

/// MAP-mode policy gradient: the kernel term removed, one particle per
/// state. This is the deterministic-policy-gradient-style update
/// `mean_states ∇_a Q(s, a)·∂f(ξ; s)/∂φ` and recovers a DDPG-like actor
/// when used in place of the SVGD update.
pub fn map_policy_gradient(
    net: &SamplerNetwork,
    states: &Tensor,
    q: &dyn SoftQFunction,
    rng: &mut Rng,
) -> Result<MlpParams> {
    if states.cols() != net.state_dim {
        return Err(SoftqError::invalid("state batch dim mismatch"));
    }
    let b = states.rows();
    let d = net.action_dim;
    let noise = draw_noise(b, d, rng);
    let input = Tensor::hcat(states, &noise);
    let cache = mlp_forward_cached(&net.params, &input)?;
    let actions = cache.output().clone();
    let mut cot = q.q_action_grads(states, &actions)?;
    let norm = 1.0 / b as f64;
    for x in cot.data_mut() {
        *x *= norm;
    }
    let (grads, _) = mlp_backward_cached(&net.params, &cache, &cot, true, false)?;
    Ok(grads.expect("param grads"))
}
