//! Evaluation rollouts: greedy-stochastic episodes (actions sampled from
//! the sampler network, no exploration noise), trajectory dumps, and the
//! goal-occupancy summary.

use std::io::Write as _;
use std::path::Path;

use crate::env::{MultiGoalConfig, MultiGoalEnv};
use crate::error::Result;
use crate::rng::Rng;
use crate::svgd::{sample_actions, SamplerNetwork};

/// One recorded environment step.
#[derive(Debug, Clone)]
pub struct TrajStep {
    /// Position after the step.
    pub x: f64,
    pub y: f64,
    /// Clipped action taken.
    pub ax: f64,
    pub ay: f64,
    pub reward: f64,
}

/// Result of a batch of evaluation rollouts.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Fraction of rollouts whose nearest terminal goal is each goal.
    pub occupancy: Vec<f64>,
    /// Mean undiscounted episode return.
    pub mean_return: f64,
    pub trajectories: Vec<Vec<TrajStep>>,
}

impl EvalReport {
    pub fn min_occupancy(&self) -> f64 {
        self.occupancy.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Runs `n_rollouts` episodes with actions drawn from the sampler.
pub fn evaluate(
    cfg: &MultiGoalConfig,
    sampler: &SamplerNetwork,
    n_rollouts: usize,
    rng: &mut Rng,
) -> Result<EvalReport> {
    let mut env = MultiGoalEnv::new(cfg.clone())?;
    let mut counts = vec![0usize; cfg.goals.len()];
    let mut trajectories = Vec::with_capacity(n_rollouts);
    let mut total_return = 0.0;
    for _ in 0..n_rollouts {
        env.reset(rng);
        let mut steps = Vec::with_capacity(cfg.horizon);
        let final_pos;
        loop {
            let state = env.state();
            let action = sample_actions(sampler, &state, 1, rng)?;
            let a = [action.at(0, 0), action.at(0, 1)];
            let (pos, reward, done) = env.step(a)?;
            steps.push(TrajStep {
                x: pos[0],
                y: pos[1],
                ax: a[0].clamp(-1.0, 1.0),
                ay: a[1].clamp(-1.0, 1.0),
                reward,
            });
            total_return += reward;
            if done {
                final_pos = pos;
                break;
            }
        }
        counts[env.nearest_goal(final_pos)] += 1;
        trajectories.push(steps);
    }
    let occupancy = counts
        .iter()
        .map(|&c| {
            if n_rollouts == 0 {
                0.0
            } else {
                c as f64 / n_rollouts as f64
            }
        })
        .collect();
    Ok(EvalReport {
        occupancy,
        mean_return: if n_rollouts == 0 {
            0.0
        } else {
            total_return / n_rollouts as f64
        },
        trajectories,
    })
}

pub const TRAJECTORY_HEADER: &str = "episode,step,x,y,ax,ay,reward";

/// Trajectory dump, one row per environment step.
pub fn write_trajectories_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (ep, traj) in report.trajectories.iter().enumerate() {
        for (i, s) in traj.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                ep,
                i + 1,
                s.x,
                s.y,
                s.ax,
                s.ay,
                s.reward
            ));
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Goal-occupancy summary: which fraction of rollouts ended nearest to each
/// goal.
pub fn write_occupancy_csv(path: &Path, cfg: &MultiGoalConfig, report: &EvalReport) -> Result<()> {
    let mut out = String::from("goal,x,y,fraction\n");
    for (i, g) in cfg.goals.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", i, g[0], g[1], report.occupancy[i]));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
