//! The soft Q-learning training loop.
//!
//! Per environment step: collect one transition into the replay buffer,
//! update the soft Q-function on a uniform minibatch against
//! importance-sampled soft-value targets from the frozen target network,
//! and update the sampling network by backpropagating the Stein direction.
//! Target parameters are hard-copied (τ = 1) every fixed number of steps.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng as _;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::env::MultiGoalEnv;
use crate::error::{Result, SoftqError};
use crate::eval::{evaluate, write_occupancy_csv, write_trajectories_csv};
use crate::explore::OuNoise;
use crate::metrics::{write_metrics_csv, MetricsRow};
use crate::nn::{adam_step, mlp_backward_cached, mlp_forward_cached, AdamState, MlpParams};
use crate::qnet::QNetwork;
use crate::replay::{ReplayBuffer, Transition};
use crate::rng::{substream, Rng, Stream};
use crate::svgd::{amortized_policy_gradient, map_policy_gradient, sample_actions, SamplerNetwork};
use crate::tensor::Tensor;
use crate::value::{draw_uniform_box, estimate_soft_value, Proposal};

/// Parameters past this magnitude are treated as numeric divergence; the
/// run aborts with a diagnostic dump before downstream math turns them
/// into overflows.
const PARAM_DIVERGENCE_LIMIT: f64 = 1e100;

/// All random substreams a training run draws from.
pub struct TrainRngs {
    pub env: Rng,
    pub explore: Rng,
    pub ou: Rng,
    pub minibatch: Rng,
    pub svgd: Rng,
    pub value: Rng,
}

impl TrainRngs {
    pub fn new(root_seed: u64) -> Self {
        TrainRngs {
            env: substream(root_seed, Stream::Env),
            explore: substream(root_seed, Stream::Explore),
            ou: substream(root_seed, Stream::OuNoise),
            minibatch: substream(root_seed, Stream::Minibatch),
            svgd: substream(root_seed, Stream::Svgd),
            value: substream(root_seed, Stream::Value),
        }
    }
}

/// Loss, gradients and diagnostics of one soft Q update.
#[derive(Debug, Clone)]
pub struct QLossOutput {
    /// Mean squared soft Bellman error, `mean ½(ŷ − Q(s,a))²`.
    pub loss: f64,
    /// Gradient of the loss with respect to the Q-network parameters.
    pub grads: MlpParams,
    /// Mean soft value of the bootstrap targets in this batch.
    pub mean_soft_value: f64,
    /// Proposal fallbacks recorded by the soft-value estimator.
    pub fallbacks: usize,
}

fn stack_states(minibatch: &[Transition], ds: usize, next: bool) -> Result<Tensor> {
    let mut data = Vec::with_capacity(minibatch.len() * ds);
    for t in minibatch {
        let s = if next { &t.next_state } else { &t.state };
        if s.len() != ds {
            return Err(SoftqError::invalid("transition state dim mismatch"));
        }
        data.extend_from_slice(s);
    }
    Tensor::from_vec(&[minibatch.len(), ds], data)
}

fn stack_actions(minibatch: &[Transition], da: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(minibatch.len() * da);
    for t in minibatch {
        if t.action.len() != da {
            return Err(SoftqError::invalid("transition action dim mismatch"));
        }
        data.extend_from_slice(&t.action);
    }
    Tensor::from_vec(&[minibatch.len(), da], data)
}

/// One soft Q-learning loss evaluation with gradients.
///
/// Targets are `ŷ = r + γ·(1−terminal)·V̂(s')` with `V̂` estimated from the
/// *target* network; gradients flow only through `Q(s, a)`.
#[allow(clippy::too_many_arguments)]
pub fn q_loss_and_grad(
    q_net: &QNetwork,
    target_q: &QNetwork,
    minibatch: &[Transition],
    gamma: f64,
    alpha: f64,
    k_v: usize,
    proposal: Proposal<'_>,
    rng: &mut Rng,
) -> Result<QLossOutput> {
    if minibatch.is_empty() {
        return Err(SoftqError::invalid("empty minibatch"));
    }
    let (ds, da) = (q_net.state_dim, q_net.action_dim);
    let b = minibatch.len();
    let states = stack_states(minibatch, ds, false)?;
    let actions = stack_actions(minibatch, da)?;
    let next_states = stack_states(minibatch, ds, true)?;

    let est = estimate_soft_value(target_q, &next_states, proposal, alpha, k_v, rng)?;
    let targets: Vec<f64> = minibatch
        .iter()
        .zip(&est.values)
        .map(|(t, &v)| t.reward + gamma * if t.terminal { 0.0 } else { v })
        .collect();

    let input = Tensor::hcat(&states, &actions);
    let cache = mlp_forward_cached(&q_net.params, &input)?;
    let q_vals = cache.output();

    let mut loss = 0.0;
    let mut cot = Tensor::zeros(&[b, 1]);
    let inv_b = 1.0 / b as f64;
    for i in 0..b {
        let diff = q_vals.at(i, 0) - targets[i];
        loss += 0.5 * diff * diff * inv_b;
        cot.row_mut(i)[0] = diff * inv_b;
    }
    let (grads, _) = mlp_backward_cached(&q_net.params, &cache, &cot, true, false)?;
    let mean_soft_value = est.values.iter().sum::<f64>() / b as f64;
    Ok(QLossOutput {
        loss,
        grads: grads.expect("param grads"),
        mean_soft_value,
        fallbacks: est.fallbacks,
    })
}

/// Collects one environment step into the replay buffer and returns the
/// recorded transition.
///
/// Resets the environment (and the OU process) whenever the previous episode
/// finished. Until the buffer holds `min_pool` transitions, actions are
/// uniform over the action box; afterwards they are sampler draws plus OU
/// noise, clipped back into the box.
pub fn collect_step(
    env: &mut MultiGoalEnv,
    sampler: &SamplerNetwork,
    ou: &mut OuNoise,
    buffer: &mut ReplayBuffer,
    min_pool: usize,
    rngs: &mut TrainRngs,
) -> Result<Transition> {
    if env.needs_reset() {
        env.reset(&mut rngs.env);
        ou.reset();
    }
    let state = env.state();
    let action = if buffer.len() < min_pool {
        [
            rngs.explore.gen_range(-1.0..=1.0),
            rngs.explore.gen_range(-1.0..=1.0),
        ]
    } else {
        let raw = sample_actions(sampler, &state, 1, &mut rngs.explore)?;
        let noise = ou.step(&mut rngs.ou);
        [
            (raw.at(0, 0) + noise[0]).clamp(-1.0, 1.0),
            (raw.at(0, 1) + noise[1]).clamp(-1.0, 1.0),
        ]
    };
    let (next, reward, terminal) = env.step(action)?;
    let transition = Transition {
        state: state.to_vec(),
        action: action.to_vec(),
        reward,
        next_state: next.to_vec(),
        terminal,
    };
    buffer.push(transition.clone());
    Ok(transition)
}

/// Everything a finished run hands back to callers.
pub struct TrainOutcome {
    pub metrics: Vec<MetricsRow>,
    pub q_net: QNetwork,
    pub sampler: SamplerNetwork,
    /// Total soft-value proposal fallbacks over the run.
    pub value_fallbacks: u64,
    pub metrics_path: PathBuf,
    pub final_checkpoint_path: PathBuf,
}

fn make_checkpoint(
    ds: usize,
    da: usize,
    q: &QNetwork,
    q_target: &QNetwork,
    sampler: &SamplerNetwork,
    sampler_target: &SamplerNetwork,
) -> Checkpoint {
    Checkpoint {
        state_dim: ds,
        action_dim: da,
        sections: vec![
            ("q".into(), q.params.clone()),
            ("q_target".into(), q_target.params.clone()),
            ("policy".into(), sampler.params.clone()),
            // Maintained and checkpointed alongside the others, but no
            // update consumes it.
            ("policy_target".into(), sampler_target.params.clone()),
        ],
    }
}

/// Runs the full training loop described by `config`, writing the resolved
/// config, metrics CSV, checkpoints, and final trajectory dumps into the
/// configured output directory.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let tc = &config.train;
    let out_dir = &config.output.dir;
    std::fs::create_dir_all(out_dir)?;
    config.save(&out_dir.join("config.toml"))?;

    let mg_cfg = config.env.to_multigoal()?;
    let mut env = MultiGoalEnv::new(mg_cfg.clone())?;
    let (ds, da) = (env.state_dim(), env.action_dim());

    let mut rngs = TrainRngs::new(tc.seed);
    let mut init_rng = substream(tc.seed, Stream::Init);
    let mut q = QNetwork::new(ds, da, &mut init_rng);
    let mut sampler = SamplerNetwork::new_tanh_200(ds, da, &mut init_rng);
    let mut q_target = q.clone();
    let mut sampler_target = sampler.clone();
    let mut q_adam = AdamState::new(&q.params, tc.q_lr);
    let mut pi_adam = AdamState::new(&sampler.params, tc.policy_lr);
    let mut buffer = ReplayBuffer::new(tc.replay_capacity);
    let mut ou = OuNoise::new(da, tc.ou_theta, tc.ou_sigma);

    let ckpt_path = |epoch: usize| out_dir.join(format!("checkpoint_epoch_{epoch:04}.bin"));
    make_checkpoint(ds, da, &q, &q_target, &sampler, &sampler_target).save(&ckpt_path(0))?;
    let mut final_checkpoint_path = ckpt_path(0);

    let metrics_path = out_dir.join("metrics.csv");
    let mut metrics: Vec<MetricsRow> = Vec::with_capacity(tc.n_epochs);
    write_metrics_csv(&metrics_path, &metrics)?;

    let mut global_step: u64 = 0;
    let mut value_fallbacks: u64 = 0;
    let mut ep_return = 0.0;
    let mut ep_disc_return = 0.0;
    let mut ep_gamma_pow = 1.0;

    for epoch in 1..=tc.n_epochs {
        let epoch_start = Instant::now();
        let mut finished_returns: Vec<f64> = Vec::new();
        let mut finished_disc: Vec<f64> = Vec::new();
        let mut loss_sum = 0.0;
        let mut value_sum = 0.0;
        let mut update_count = 0u64;

        for _ in 0..tc.epoch_length {
            let t = collect_step(&mut env, &sampler, &mut ou, &mut buffer, tc.min_pool, &mut rngs)?;
            global_step += 1;
            ep_return += t.reward;
            ep_disc_return += ep_gamma_pow * t.reward;
            ep_gamma_pow *= tc.gamma;
            if t.terminal {
                finished_returns.push(ep_return);
                finished_disc.push(ep_disc_return);
                ep_return = 0.0;
                ep_disc_return = 0.0;
                ep_gamma_pow = 1.0;
            }

            if buffer.len() >= tc.min_pool {
                let proposal = if epoch > tc.proposal_switch_epoch {
                    Proposal::Sampler(&sampler)
                } else {
                    Proposal::UniformBox
                };
                let minibatch = buffer.sample(tc.batch_size, &mut rngs.minibatch)?;
                let q_out = q_loss_and_grad(
                    &q,
                    &q_target,
                    &minibatch,
                    tc.gamma,
                    tc.alpha,
                    tc.k_v,
                    proposal,
                    &mut rngs.value,
                )?;
                adam_step(&mut q_adam, &mut q.params, &q_out.grads)?;

                let diverged = |p: &MlpParams| !p.is_finite() || p.max_abs() > PARAM_DIVERGENCE_LIMIT;
                if diverged(&q.params) || !q_out.loss.is_finite() {
                    let dump = out_dir.join(format!("nan_dump_step_{global_step}.bin"));
                    make_checkpoint(ds, da, &q, &q_target, &sampler, &sampler_target)
                        .save(&dump)?;
                    return Err(SoftqError::NumericAbort {
                        step: global_step,
                        dump,
                    });
                }

                let batch_states = stack_states(&minibatch, ds, false)?;
                let ascent = if tc.svgd_enabled {
                    amortized_policy_gradient(
                        &sampler,
                        &batch_states,
                        &q,
                        tc.m,
                        tc.k,
                        tc.alpha,
                        false,
                        &mut rngs.svgd,
                    )?
                } else {
                    map_policy_gradient(&sampler, &batch_states, &q, &mut rngs.svgd)?
                };
                let mut descent = ascent;
                descent.scale(-1.0);
                adam_step(&mut pi_adam, &mut sampler.params, &descent)?;

                loss_sum += q_out.loss;
                value_sum += q_out.mean_soft_value;
                value_fallbacks += q_out.fallbacks as u64;
                update_count += 1;

                if diverged(&sampler.params) {
                    let dump = out_dir.join(format!("nan_dump_step_{global_step}.bin"));
                    make_checkpoint(ds, da, &q, &q_target, &sampler, &sampler_target)
                        .save(&dump)?;
                    return Err(SoftqError::NumericAbort {
                        step: global_step,
                        dump,
                    });
                }
            }

            if global_step % tc.target_update_interval as u64 == 0 {
                // Hard copies (τ = 1); target outputs stay bit-identical
                // between copies.
                q_target = q.clone();
                sampler_target = sampler.clone();
            }
        }

        let mean = |xs: &[f64]| {
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().sum::<f64>() / xs.len() as f64
            }
        };
        let elapsed = epoch_start.elapsed().as_secs_f64();
        let row = MetricsRow {
            epoch,
            mean_return: mean(&finished_returns),
            mean_disc_return: mean(&finished_disc),
            q_loss: if update_count > 0 {
                loss_sum / update_count as f64
            } else {
                0.0
            },
            mean_soft_value: if update_count > 0 {
                value_sum / update_count as f64
            } else {
                0.0
            },
            seconds: if config.output.record_wall_time {
                elapsed
            } else {
                0.0
            },
        };
        println!(
            "epoch {:>4}  episodes {:>4}  mean_return {:>10.4}  q_loss {:>12.6}  soft_value {:>10.4}  ({elapsed:.1}s)",
            epoch,
            finished_returns.len(),
            row.mean_return,
            row.q_loss,
            row.mean_soft_value,
        );
        metrics.push(row);
        write_metrics_csv(&metrics_path, &metrics)?;

        if epoch % config.output.checkpoint_interval_epochs == 0 || epoch == tc.n_epochs {
            let path = ckpt_path(epoch);
            make_checkpoint(ds, da, &q, &q_target, &sampler, &sampler_target).save(&path)?;
            final_checkpoint_path = path;
        }
    }

    // Final trajectory dumps from the trained sampler.
    let mut eval_rng = substream(tc.seed, Stream::Eval);
    let report = evaluate(&mg_cfg, &sampler, config.output.eval_rollouts, &mut eval_rng)?;
    write_trajectories_csv(&out_dir.join("trajectories.csv"), &report)?;
    write_occupancy_csv(&out_dir.join("occupancy.csv"), &mg_cfg, &report)?;

    Ok(TrainOutcome {
        metrics,
        q_net: q,
        sampler,
        value_fallbacks,
        metrics_path,
        final_checkpoint_path,
    })
}

/// Smoke helper used by tests: draws a uniform state batch inside the box
/// scaled by `radius` (states the point mass actually visits).
pub fn uniform_state_batch(n: usize, radius: f64, rng: &mut Rng) -> Tensor {
    let mut t = draw_uniform_box(n, 2, rng);
    for x in t.data_mut() {
        *x *= radius;
    }
    t
}
