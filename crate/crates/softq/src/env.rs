//! Desk-scale environments: the 2D multi-goal point mass and seeded random
//! MDP generators for oracle-driven tests.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Result, SoftqError};
use crate::rng::Rng;
use crate::tabular::TabularMdp;

/// Parameters of the multi-goal point mass.
///
/// A point mass starts near the origin and moves with velocity actions
/// clipped to `[-1,1]²`; the reward is a mixture of Gaussians centered on
/// four symmetrically placed goals minus a quadratic action cost. Episodes
/// end at the horizon or on goal capture.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGoalConfig {
    pub goals: Vec<[f64; 2]>,
    /// Peak reward of each goal Gaussian.
    pub goal_weight: f64,
    /// Width σ_g of each goal Gaussian.
    pub goal_sigma: f64,
    /// Coefficient of the ‖a‖² action cost.
    pub action_cost: f64,
    /// Episode ends when within this distance of a goal.
    pub capture_radius: f64,
    pub horizon: usize,
    /// Std of the Gaussian jitter around the origin at reset; 0 disables.
    pub reset_jitter_std: f64,
}

impl Default for MultiGoalConfig {
    fn default() -> Self {
        MultiGoalConfig {
            goals: vec![[5.0, 0.0], [-5.0, 0.0], [0.0, 5.0], [0.0, -5.0]],
            goal_weight: 10.0,
            goal_sigma: 1.0,
            action_cost: 0.01,
            capture_radius: 0.5,
            horizon: 20,
            reset_jitter_std: 0.1,
        }
    }
}

impl MultiGoalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.goals.is_empty() {
            return Err(SoftqError::Config("need at least one goal".into()));
        }
        if !(self.goal_sigma > 0.0) {
            return Err(SoftqError::Config("goal_sigma must be > 0".into()));
        }
        if self.horizon == 0 {
            return Err(SoftqError::Config("horizon must be ≥ 1".into()));
        }
        if self.capture_radius < 0.0 || self.action_cost < 0.0 || self.reset_jitter_std < 0.0 {
            return Err(SoftqError::Config(
                "capture_radius, action_cost, reset_jitter_std must be ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// The 2D multi-goal environment.
#[derive(Debug, Clone)]
pub struct MultiGoalEnv {
    cfg: MultiGoalConfig,
    position: [f64; 2],
    steps: usize,
    needs_reset: bool,
}

impl MultiGoalEnv {
    pub fn new(cfg: MultiGoalConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MultiGoalEnv {
            cfg,
            position: [0.0, 0.0],
            steps: 0,
            needs_reset: true,
        })
    }

    pub fn config(&self) -> &MultiGoalConfig {
        &self.cfg
    }

    pub fn state(&self) -> [f64; 2] {
        self.position
    }

    pub fn needs_reset(&self) -> bool {
        self.needs_reset
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn action_dim(&self) -> usize {
        2
    }

    /// Starts a fresh episode at the origin plus Gaussian jitter.
    pub fn reset(&mut self, rng: &mut Rng) -> [f64; 2] {
        let j = self.cfg.reset_jitter_std;
        self.position = if j > 0.0 {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            [j * z0, j * z1]
        } else {
            [0.0, 0.0]
        };
        self.steps = 0;
        self.needs_reset = false;
        self.position
    }

    /// Mixture-of-Gaussians reward at `position` minus the action cost of
    /// the (already clipped) action.
    pub fn reward_at(&self, position: [f64; 2], action: [f64; 2]) -> f64 {
        let two_sigma_sq = 2.0 * self.cfg.goal_sigma * self.cfg.goal_sigma;
        let goal_term: f64 = self
            .cfg
            .goals
            .iter()
            .map(|g| {
                let dx = position[0] - g[0];
                let dy = position[1] - g[1];
                self.cfg.goal_weight * (-(dx * dx + dy * dy) / two_sigma_sq).exp()
            })
            .sum();
        let cost = self.cfg.action_cost * (action[0] * action[0] + action[1] * action[1]);
        goal_term - cost
    }

    fn nearest_goal_distance(&self, position: [f64; 2]) -> f64 {
        self.cfg
            .goals
            .iter()
            .map(|g| ((position[0] - g[0]).powi(2) + (position[1] - g[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the goal nearest to `position`.
    pub fn nearest_goal(&self, position: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, g) in self.cfg.goals.iter().enumerate() {
            let d = (position[0] - g[0]).powi(2) + (position[1] - g[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Applies a clipped velocity action; unit-timestep kinematics
    /// `s' = s + a`. Errors if the episode is already finished.
    pub fn step(&mut self, action: [f64; 2]) -> Result<([f64; 2], f64, bool)> {
        if self.needs_reset {
            return Err(SoftqError::invalid(
                "stepping a finished episode; call reset first",
            ));
        }
        let a = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        self.position[0] += a[0];
        self.position[1] += a[1];
        self.steps += 1;
        let reward = self.reward_at(self.position, a);
        let captured = self.nearest_goal_distance(self.position) < self.cfg.capture_radius;
        let terminal = captured || self.steps >= self.cfg.horizon;
        if terminal {
            self.needs_reset = true;
        }
        Ok((self.position, reward, terminal))
    }
}

/// Recipe for a seeded random MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpGenSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// Fraction of transition entries zeroed before normalization.
    pub sparsity: f64,
    pub reward_min: f64,
    pub reward_max: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl MdpGenSpec {
    pub fn dense(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Self {
        MdpGenSpec {
            n_states,
            n_actions,
            sparsity: 0.0,
            reward_min: 0.0,
            reward_max: 1.0,
            gamma,
            seed,
        }
    }
}

/// Seeded random MDP: transition rows are normalized positive randoms
/// (optionally sparsified, always keeping at least one support point),
/// rewards uniform in the configured range.
pub fn generate_random_mdp(spec: &MdpGenSpec) -> Result<TabularMdp> {
    if spec.n_states < 1 || spec.n_actions < 1 {
        return Err(SoftqError::invalid("need n_states, n_actions ≥ 1"));
    }
    if !(0.0..1.0).contains(&spec.sparsity) {
        return Err(SoftqError::invalid("sparsity must lie in [0,1)"));
    }
    if spec.reward_min > spec.reward_max {
        return Err(SoftqError::invalid("empty reward range"));
    }
    let mut rng = crate::rng::substream(spec.seed, crate::rng::Stream::Env);
    let (s, a) = (spec.n_states, spec.n_actions);
    let mut transition = vec![0.0; s * a * s];
    for row in 0..s * a {
        let slice = &mut transition[row * s..(row + 1) * s];
        loop {
            for p in slice.iter_mut() {
                let keep = spec.sparsity == 0.0 || rng.gen_range(0.0..1.0) >= spec.sparsity;
                *p = if keep { rng.gen_range(0.1..1.0) } else { 0.0 };
            }
            let sum: f64 = slice.iter().sum();
            if sum > 0.0 {
                for p in slice.iter_mut() {
                    *p /= sum;
                }
                // Exact stochasticity: absorb the roundoff into the largest entry.
                let total: f64 = slice.iter().sum();
                let imax = slice
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                slice[imax] += 1.0 - total;
                break;
            }
        }
    }
    let reward: Vec<f64> = (0..s * a)
        .map(|_| {
            if spec.reward_min == spec.reward_max {
                spec.reward_min
            } else {
                rng.gen_range(spec.reward_min..spec.reward_max)
            }
        })
        .collect();
    TabularMdp::new(s, a, transition, reward, spec.gamma)
}
