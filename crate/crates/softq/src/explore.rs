//! Ornstein-Uhlenbeck exploration noise.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

/// Autocorrelated exploration noise with unit timestep:
/// `x ← x − θ·x + σ·N(0, I)`.
///
/// Stationary per-dimension standard deviation is `σ/√(1−(1−θ)²)`.
#[derive(Debug, Clone)]
pub struct OuNoise {
    state: Vec<f64>,
    pub theta: f64,
    pub sigma: f64,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64) -> Self {
        OuNoise {
            state: vec![0.0; dim],
            theta,
            sigma,
        }
    }

    /// Zeroes the process state (used at episode boundaries).
    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Advances one step and returns the new state.
    pub fn step(&mut self, rng: &mut Rng) -> &[f64] {
        for x in &mut self.state {
            let z: f64 = rng.sample(StandardNormal);
            *x += -self.theta * *x + self.sigma * z;
        }
        debug_assert!(self.state.iter().all(|x| x.is_finite()));
        &self.state
    }
}
