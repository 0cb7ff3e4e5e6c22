//! Shared helpers for the integration suites: analytic Q-functions,
//! quadrature ground truth, and a plain (non-amortized) SVGD particle run.

use softq::error::Result;
use softq::qnet::SoftQFunction;
use softq::rng::{substream, Rng, Stream};
use softq::svgd::{median_bandwidth, stein_direction, SvgdBatch};
use softq::tensor::Tensor;

/// A `SoftQFunction` backed by closures, for oracle tests with analytic
/// ground truth.
pub struct AnalyticQ {
    pub state_dim: usize,
    pub action_dim: usize,
    pub q: fn(&[f64], &[f64]) -> f64,
    pub grad: fn(&[f64], &[f64]) -> Vec<f64>,
}

impl SoftQFunction for AnalyticQ {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn q_values(&self, states: &Tensor, actions: &Tensor) -> Result<Vec<f64>> {
        Ok((0..states.rows())
            .map(|r| (self.q)(states.row(r), actions.row(r)))
            .collect())
    }

    fn q_action_grads(&self, states: &Tensor, actions: &Tensor) -> Result<Tensor> {
        let mut out = Tensor::zeros(&[states.rows(), self.action_dim]);
        for r in 0..states.rows() {
            let g = (self.grad)(states.row(r), actions.row(r));
            out.row_mut(r).copy_from_slice(&g);
        }
        Ok(out)
    }
}

/// `Q(a) = −‖a‖²/2`, independent of state.
pub fn negative_quadratic_q(state_dim: usize, action_dim: usize) -> AnalyticQ {
    AnalyticQ {
        state_dim,
        action_dim,
        q: |_s, a| -0.5 * a.iter().map(|x| x * x).sum::<f64>(),
        grad: |_s, a| a.iter().map(|x| -x).collect(),
    }
}

/// Midpoint-rule quadrature of `α·log ∫_{[-1,1]²} exp(Q(a)/α) da` on an
/// `n×n` grid, along with the raw integral `∫ exp(Q/α)`.
pub fn soft_value_quadrature(q: fn(&[f64]) -> f64, alpha: f64, n: usize) -> (f64, f64) {
    let cell = 2.0 / n as f64;
    let mut integral = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = [-1.0 + (i as f64 + 0.5) * cell, -1.0 + (j as f64 + 0.5) * cell];
            integral += (q(&a) / alpha).exp() * cell * cell;
        }
    }
    (alpha * integral.ln(), integral)
}

/// Plain SVGD on a 2-d Gaussian target `N(mean, cov)`: `n` particles,
/// `steps` updates with the given step size, median-heuristic bandwidth.
/// Returns (max per-dim mean error, max covariance entry error).
pub fn run_svgd_gaussian(
    seed: u64,
    n: usize,
    steps: usize,
    step_size: f64,
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
) -> (f64, f64) {
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let inv = [
        [cov[1][1] / det, -cov[0][1] / det],
        [-cov[1][0] / det, cov[0][0] / det],
    ];
    let grad_log_p = move |x: &[f64]| -> [f64; 2] {
        let d = [x[0] - mean[0], x[1] - mean[1]];
        [
            -(inv[0][0] * d[0] + inv[0][1] * d[1]),
            -(inv[1][0] * d[0] + inv[1][1] * d[1]),
        ]
    };

    let mut rng: Rng = substream(seed, Stream::Svgd);
    let mut particles = Tensor::zeros(&[n, 2]);
    for x in particles.data_mut() {
        *x = rng.sample::<f64, _>(StandardNormal);
    }

    for _ in 0..steps {
        let h = median_bandwidth(&particles).expect("n ≥ 2");
        let mut grads = Tensor::zeros(&[n, 2]);
        for i in 0..n {
            let g = grad_log_p(particles.row(i));
            grads.row_mut(i).copy_from_slice(&g);
        }
        let batch = SvgdBatch::new(
            vec![],
            particles.clone(),
            particles.clone(),
            grads,
            h,
            1.0,
        )
        .expect("valid batch");
        let delta = stein_direction(&batch);
        for (x, d) in particles.data_mut().iter_mut().zip(delta.data()) {
            *x += step_size * d;
        }
    }

    let mut emp_mean = [0.0f64; 2];
    for i in 0..n {
        emp_mean[0] += particles.at(i, 0);
        emp_mean[1] += particles.at(i, 1);
    }
    emp_mean[0] /= n as f64;
    emp_mean[1] /= n as f64;
    let mut emp_cov = [[0.0f64; 2]; 2];
    for i in 0..n {
        let d = [
            particles.at(i, 0) - emp_mean[0],
            particles.at(i, 1) - emp_mean[1],
        ];
        for r in 0..2 {
            for c in 0..2 {
                emp_cov[r][c] += d[r] * d[c] / n as f64;
            }
        }
    }
    let mean_err = (emp_mean[0] - mean[0])
        .abs()
        .max((emp_mean[1] - mean[1]).abs());
    let mut cov_err = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            cov_err = cov_err.max((emp_cov[r][c] - cov[r][c]).abs());
        }
    }
    (mean_err, cov_err)
}
