//! Executable property battery for the tabular solvers.
//!
//! Every check pairs the production solver with an independently coded
//! route: a hard (max-based) value iteration, a finite-horizon brute-force
//! evaluation, or a direct normalizer. The battery powers the
//! `oracle-check` command and returns structured pass/fail results.

use rand::Rng as _;

use crate::env::{generate_random_mdp, MdpGenSpec};
use crate::error::Result;
use crate::rng::{substream, Rng, Stream};
use crate::tabular::{
    boltzmann_improvement, evaluate_policy_soft, maxent_policy_from_q, soft_bellman_backup,
    soft_value_discrete, soft_value_iteration, soft_value_iteration_from, sup_norm_diff, Matrix,
    TabularMdp,
};

/// Outcome of one property check.
#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub property: String,
    pub pass: bool,
    pub detail: String,
}

impl PropertyResult {
    fn new(property: &str, pass: bool, detail: String) -> Self {
        PropertyResult {
            property: property.to_string(),
            pass,
            detail,
        }
    }
}

/// Hard (max-based) value iteration, written as plain loops so it shares no
/// code with the soft path. Returns the Q fixed point.
pub fn hard_value_iteration(mdp: &TabularMdp, tol: f64, max_iter: usize) -> Matrix {
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    let mut q = vec![vec![0.0; a_n]; s_n];
    for _ in 0..max_iter {
        let v: Vec<f64> = q
            .iter()
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut next = vec![vec![0.0; a_n]; s_n];
        let mut diff: f64 = 0.0;
        for s in 0..s_n {
            for a in 0..a_n {
                let mut acc = 0.0;
                for (s2, vv) in v.iter().enumerate() {
                    acc += mdp.transition(s, a, s2) * vv;
                }
                next[s][a] = mdp.reward(s, a) + mdp.gamma() * acc;
                diff = diff.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if diff <= tol {
            break;
        }
    }
    q
}

/// Brute-force finite-horizon soft Q: `horizon` applications of the
/// recursive definition starting from zero, written as explicit triple
/// loops with its own log-sum-exp.
pub fn finite_horizon_soft_q(mdp: &TabularMdp, alpha: f64, horizon: usize) -> Matrix {
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    let mut q = vec![vec![0.0; a_n]; s_n];
    for _ in 0..horizon {
        let mut v = vec![0.0; s_n];
        for (s, row) in q.iter().enumerate() {
            let mut m = f64::NEG_INFINITY;
            for &x in row {
                if x > m {
                    m = x;
                }
            }
            let mut sum = 0.0;
            for &x in row {
                sum += ((x - m) / alpha).exp();
            }
            v[s] = m + alpha * sum.ln();
        }
        let mut next = vec![vec![0.0; a_n]; s_n];
        for s in 0..s_n {
            for a in 0..a_n {
                let mut acc = 0.0;
                for (s2, vv) in v.iter().enumerate() {
                    acc += mdp.transition(s, a, s2) * vv;
                }
                next[s][a] = mdp.reward(s, a) + mdp.gamma() * acc;
            }
        }
        q = next;
    }
    q
}

fn random_q(mdp: &TabularMdp, scale: f64, rng: &mut Rng) -> Matrix {
    (0..mdp.n_states())
        .map(|_| {
            (0..mdp.n_actions())
                .map(|_| rng.gen_range(-scale..scale))
                .collect()
        })
        .collect()
}

fn random_policy(mdp: &TabularMdp, rng: &mut Rng) -> Matrix {
    (0..mdp.n_states())
        .map(|_| {
            let mut row: Vec<f64> = (0..mdp.n_actions())
                .map(|_| rng.gen_range(0.05..1.0))
                .collect();
            let sum: f64 = row.iter().sum();
            for x in &mut row {
                *x /= sum;
            }
            row
        })
        .collect()
}

/// Contraction of the soft backup: every pair satisfies
/// `‖TQ₁ − TQ₂‖∞ ≤ γ‖Q₁ − Q₂‖∞ + 1e−12`, and the worst observed Lipschitz
/// ratio stays below 1. One pair is a constant shift, for which the ratio
/// equals γ exactly, so an out-of-range discount is caught.
pub fn check_contraction(
    mdp: &TabularMdp,
    alpha: f64,
    n_pairs: usize,
    rng: &mut Rng,
) -> Result<PropertyResult> {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_ratio: f64 = 0.0;
    for pair in 0..n_pairs {
        let q1 = random_q(mdp, 5.0, rng);
        let q2 = if pair == 0 {
            // Constant shift: ‖TQ₁ − TQ₂‖ = γ·c exactly.
            q1.iter()
                .map(|row| row.iter().map(|&x| x + 2.0).collect())
                .collect()
        } else {
            random_q(mdp, 5.0, rng)
        };
        let t1 = soft_bellman_backup(mdp, &q1, alpha)?;
        let t2 = soft_bellman_backup(mdp, &q2, alpha)?;
        let lhs = sup_norm_diff(&t1, &t2);
        let rhs = mdp.gamma() * sup_norm_diff(&q1, &q2);
        worst_excess = worst_excess.max(lhs - rhs);
        if sup_norm_diff(&q1, &q2) > 0.0 {
            worst_ratio = worst_ratio.max(lhs / sup_norm_diff(&q1, &q2));
        }
    }
    let pass = worst_excess <= 1e-12 && worst_ratio < 1.0;
    Ok(PropertyResult::new(
        "contraction",
        pass,
        format!("worst excess {worst_excess:.3e}, worst ratio {worst_ratio:.6}"),
    ))
}

/// Theorem-style monotone improvement: the Boltzmann improvement of any
/// policy dominates it elementwise within `1e-8` slack.
pub fn check_policy_improvement(
    mdp: &TabularMdp,
    alpha: f64,
    rng: &mut Rng,
) -> Result<PropertyResult> {
    let pi = random_policy(mdp, rng);
    let q_pi = evaluate_policy_soft(mdp, &pi, alpha, 1e-12)?;
    let improved = boltzmann_improvement(&q_pi, alpha);
    let q_improved = evaluate_policy_soft(mdp, &improved, alpha, 1e-12)?;
    let mut worst = f64::INFINITY;
    for (row_new, row_old) in q_improved.iter().zip(&q_pi) {
        for (&qn, &qo) in row_new.iter().zip(row_old) {
            worst = worst.min(qn - qo);
        }
    }
    let pass = worst >= -1e-8;
    Ok(PropertyResult::new(
        "policy_improvement",
        pass,
        format!("min elementwise gain {worst:.3e}"),
    ))
}

/// `maxent_policy_from_q` rows equal a directly normalized
/// `exp(q/α)/Σ exp(q/α)` computed without the soft value.
pub fn check_policy_consistency(alpha: f64, n_rows: usize, rng: &mut Rng) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..n_rows {
        let width = rng.gen_range(1..=6);
        let row: Vec<f64> = (0..width).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let v = soft_value_discrete(&row, alpha)?;
        let policy = maxent_policy_from_q(&[row.clone()].to_vec(), &[v], alpha)?;
        // Independent normalizer.
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = row.iter().map(|&x| ((x - m) / alpha).exp()).collect();
        let z: f64 = weights.iter().sum();
        for (p, w) in policy[0].iter().zip(&weights) {
            worst = worst.max((p - w / z).abs());
        }
    }
    let pass = worst <= 1e-12;
    Ok(PropertyResult::new(
        "policy_consistency",
        pass,
        format!("max deviation from direct softmax {worst:.3e}"),
    ))
}

/// At α → 0 the soft fixed point matches hard value iteration.
pub fn check_hard_limit(mdp: &TabularMdp) -> Result<PropertyResult> {
    let soft = soft_value_iteration(mdp, 1e-6, 1e-10, 200_000)?;
    let hard = hard_value_iteration(mdp, 1e-12, 200_000);
    let gap = sup_norm_diff(&soft.q, &hard);
    let pass = gap <= 1e-3;
    Ok(PropertyResult::new(
        "hard_limit",
        pass,
        format!("sup-norm gap to hard value iteration {gap:.3e}"),
    ))
}

/// At large α the optimal policy approaches uniform in total variation.
pub fn check_uniform_limit(seed: u64, n_states: usize, n_actions: usize) -> Result<PropertyResult> {
    let spec = MdpGenSpec {
        n_states,
        n_actions,
        sparsity: 0.0,
        reward_min: 0.0,
        reward_max: 0.5,
        gamma: 0.5,
        seed,
    };
    let mdp = generate_random_mdp(&spec)?;
    let sol = soft_value_iteration(&mdp, 1e3, 1e-10, 200_000)?;
    let uniform = 1.0 / n_actions as f64;
    let mut worst_tv: f64 = 0.0;
    for row in &sol.policy {
        let tv: f64 = 0.5 * row.iter().map(|p| (p - uniform).abs()).sum::<f64>();
        worst_tv = worst_tv.max(tv);
    }
    let pass = worst_tv <= 1e-3;
    Ok(PropertyResult::new(
        "uniform_limit",
        pass,
        format!("max total variation from uniform {worst_tv:.3e}"),
    ))
}

/// The fixed point is unique: iterations from zero and from a random start
/// land within `10·tol` of each other.
pub fn check_uniqueness(mdp: &TabularMdp, alpha: f64, rng: &mut Rng) -> Result<PropertyResult> {
    let tol = 1e-10;
    let from_zero = soft_value_iteration(mdp, alpha, tol, 200_000)?;
    let start = random_q(mdp, 3.0, rng);
    let from_random = soft_value_iteration_from(mdp, start, alpha, tol, 200_000)?;
    let gap = sup_norm_diff(&from_zero.q, &from_random.q);
    let pass = gap <= 10.0 * tol;
    Ok(PropertyResult::new(
        "uniqueness",
        pass,
        format!("gap between starts {gap:.3e}"),
    ))
}

/// The solver's fixed point has a small Bellman residual and matches the
/// brute-force finite-horizon evaluation.
pub fn check_fixed_point(mdp: &TabularMdp, alpha: f64) -> Result<PropertyResult> {
    let sol = soft_value_iteration(mdp, alpha, 1e-10, 200_000)?;
    let brute = finite_horizon_soft_q(mdp, alpha, 300);
    let gap = sup_norm_diff(&sol.q, &brute);
    let pass = sol.residual <= 1e-8 && gap <= 1e-4;
    Ok(PropertyResult::new(
        "fixed_point",
        pass,
        format!("residual {:.3e}, gap to horizon-300 brute force {gap:.3e}", sol.residual),
    ))
}

/// Battery configuration: which MDP sizes to draw and how many per size.
#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub seed: u64,
    /// `(n_states, n_actions)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub mdps_per_size: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 42,
            sizes: vec![(1, 1), (3, 2), (5, 3), (6, 4)],
            mdps_per_size: 3,
        }
    }
}

/// Runs the whole battery over seeded random MDPs (and, optionally, one
/// explicitly supplied MDP), returning one result per property per MDP.
pub fn run_battery(cfg: &BatteryConfig, extra_mdp: Option<&TabularMdp>) -> Result<Vec<PropertyResult>> {
    let mut rng = substream(cfg.seed, Stream::Env);
    let mut results = Vec::new();
    let mut targets: Vec<(String, TabularMdp)> = Vec::new();
    for &(s, a) in &cfg.sizes {
        for i in 0..cfg.mdps_per_size {
            let spec = MdpGenSpec::dense(s, a, 0.9, cfg.seed.wrapping_add((s * 100 + a * 10 + i) as u64));
            targets.push((format!("{s}x{a}#{i}"), generate_random_mdp(&spec)?));
        }
    }
    if let Some(mdp) = extra_mdp {
        targets.push(("supplied".into(), mdp.clone()));
    }
    for (tag, mdp) in &targets {
        let alpha = 1.0;
        for mut r in [
            check_fixed_point(mdp, alpha)?,
            check_contraction(mdp, alpha, 100, &mut rng)?,
            check_policy_improvement(mdp, alpha, &mut rng)?,
            check_hard_limit(mdp)?,
            check_uniqueness(mdp, alpha, &mut rng)?,
        ] {
            r.property = format!("{} [{tag}]", r.property);
            results.push(r);
        }
    }
    results.push(check_policy_consistency(0.7, 1000, &mut rng)?);
    for &(s, a) in &cfg.sizes {
        let mut r = check_uniform_limit(cfg.seed.wrapping_add(999), s, a)?;
        r.property = format!("{} [{s}x{a}]", r.property);
        results.push(r);
    }
    Ok(results)
}
