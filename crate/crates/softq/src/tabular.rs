//! Exact maximum-entropy solvers on finite MDPs.
//!
//! These are the ground-truth oracles for the continuous-control pipeline:
//! the soft Bellman backup
//!
//! ```text
//! (TQ)(s,a) = r(s,a) + γ·Σ_{s'} p(s'|s,a)·V(s'),
//! V(s) = α·log Σ_a exp(Q(s,a)/α),
//! ```
//!
//! its fixed point, the Boltzmann policy `π(a|s) = exp((Q(s,a) − V(s))/α)`,
//! soft policy evaluation, and the closed-form equivalence between the
//! entropy-regularized policy gradient and the soft Bellman-error gradient
//! on single-state bandits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SoftqError};

/// `matrix[s][a]` layout used for Q-values and policies.
pub type Matrix = Vec<Vec<f64>>;

/// A finite MDP: transition tensor `[S×A×S]`, reward matrix `[S×A]`,
/// discount strictly inside (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Flat `[S×A×S]`, row `(s,a)` is a distribution over next states.
    transition: Vec<f64>,
    /// Flat `[S×A]`.
    reward: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    /// Validates stochasticity (each `transition[s][a][·]` sums to 1 within
    /// 1e-12, entries ≥ 0), finite bounded rewards, and `0 < gamma < 1`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(SoftqError::invalid("n_states and n_actions must be ≥ 1"));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(SoftqError::invalid("transition tensor has wrong size"));
        }
        if reward.len() != n_states * n_actions {
            return Err(SoftqError::invalid("reward matrix has wrong size"));
        }
        if !reward.iter().all(|r| r.is_finite()) {
            return Err(SoftqError::invalid("rewards must be finite"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(SoftqError::invalid("gamma must lie strictly inside (0,1)"));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..][..n_states];
                if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                    return Err(SoftqError::invalid(format!(
                        "transition row ({s},{a}) has a negative or non-finite entry"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(SoftqError::invalid(format!(
                        "transition row ({s},{a}) sums to {sum}, not 1"
                    )));
                }
            }
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
        })
    }

    /// Skips all validation. For test shims that need deliberately broken
    /// MDPs (e.g. γ > 1 negative controls); everything else goes through
    /// [`TabularMdp::new`].
    pub fn new_unchecked(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Self {
        TabularMdp {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Probability of `s2` given `(s, a)`.
    pub fn transition(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s2]
    }

    fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[(s * self.n_actions + a) * self.n_states..][..self.n_states]
    }

    /// Serializes to the plain-text MDP document format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "softq-mdp v1");
        let _ = writeln!(out, "states {}", self.n_states);
        let _ = writeln!(out, "actions {}", self.n_actions);
        let _ = writeln!(out, "gamma {}", self.gamma);
        let _ = writeln!(out, "reward");
        for s in 0..self.n_states {
            let row: Vec<String> = (0..self.n_actions)
                .map(|a| format!("{}", self.reward(s, a)))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let _ = writeln!(out, "transition");
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row: Vec<String> = self
                    .transition_row(s, a)
                    .iter()
                    .map(|p| format!("{p}"))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    /// Parses the plain-text MDP document format, re-validating stochasticity.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| SoftqError::Parse(format!("unexpected end of file, wanted {what}")))
        };
        let header = next("header")?;
        if header != "softq-mdp v1" {
            return Err(SoftqError::Parse(format!("bad header line: {header:?}")));
        }
        let field = |line: &str, key: &str| -> Result<String> {
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| SoftqError::Parse(format!("malformed line: {line:?}")))?;
            if k != key {
                return Err(SoftqError::Parse(format!("expected {key:?}, got {k:?}")));
            }
            Ok(v.trim().to_string())
        };
        let parse_f64 = |tok: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| SoftqError::Parse(format!("bad number {tok:?}")))
        };
        let n_states: usize = field(next("states")?, "states")?
            .parse()
            .map_err(|_| SoftqError::Parse("bad states count".into()))?;
        let n_actions: usize = field(next("actions")?, "actions")?
            .parse()
            .map_err(|_| SoftqError::Parse("bad actions count".into()))?;
        let gamma = parse_f64(&field(next("gamma")?, "gamma")?)?;
        if next("reward section")? != "reward" {
            return Err(SoftqError::Parse("missing reward section".into()));
        }
        let mut reward = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            let row = next("reward row")?;
            let vals: Vec<&str> = row.split_whitespace().collect();
            if vals.len() != n_actions {
                return Err(SoftqError::Parse(format!(
                    "reward row {s} has {} entries, expected {n_actions}",
                    vals.len()
                )));
            }
            for v in vals {
                reward.push(parse_f64(v)?);
            }
        }
        if next("transition section")? != "transition" {
            return Err(SoftqError::Parse("missing transition section".into()));
        }
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        for i in 0..n_states * n_actions {
            let row = next("transition row")?;
            let vals: Vec<&str> = row.split_whitespace().collect();
            if vals.len() != n_states {
                return Err(SoftqError::Parse(format!(
                    "transition row {i} has {} entries, expected {n_states}",
                    vals.len()
                )));
            }
            for v in vals {
                transition.push(parse_f64(v)?);
            }
        }
        if lines.next().is_some() {
            return Err(SoftqError::Parse("trailing content after transition".into()));
        }
        TabularMdp::new(n_states, n_actions, transition, reward, gamma)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

/// Fixed point of soft value iteration: Q, V, the Boltzmann policy, the
/// temperature it was solved at, and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SoftSolution {
    pub q: Matrix,
    pub v: Vec<f64>,
    pub policy: Matrix,
    pub alpha: f64,
    pub iterations: usize,
    /// Final sup-norm Bellman error ‖TQ − Q‖∞.
    pub residual: f64,
}

/// `α·log Σ_a exp(q_row[a]/α)`, max-shifted so nothing overflows for
/// |q| up to ~1e6.
pub fn soft_value_discrete(q_row: &[f64], alpha: f64) -> Result<f64> {
    if q_row.is_empty() {
        return Err(SoftqError::invalid("empty Q row"));
    }
    if !q_row.iter().all(|q| q.is_finite()) {
        return Err(SoftqError::invalid("non-finite Q entry"));
    }
    if !(alpha > 0.0) {
        return Err(SoftqError::invalid("alpha must be > 0"));
    }
    Ok(log_sum_exp_scaled(q_row, alpha))
}

/// Max-shifted `α·log Σ exp(x/α)` without input validation.
fn log_sum_exp_scaled(xs: &[f64], alpha: f64) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = xs.iter().map(|x| ((x - m) / alpha).exp()).sum();
    m + alpha * sum.ln()
}

fn check_q_shape(mdp: &TabularMdp, q: &Matrix) -> Result<()> {
    if q.len() != mdp.n_states() || q.iter().any(|row| row.len() != mdp.n_actions()) {
        return Err(SoftqError::invalid("Q matrix shape does not match MDP"));
    }
    if q.iter().flatten().any(|x| !x.is_finite()) {
        return Err(SoftqError::invalid("non-finite Q entry"));
    }
    Ok(())
}

/// One application of the soft Bellman operator:
/// `q'[s][a] = r[s][a] + γ·Σ_{s'} p(s'|s,a)·(α·log Σ_{a'} exp(q[s'][a']/α))`.
pub fn soft_bellman_backup(mdp: &TabularMdp, q: &Matrix, alpha: f64) -> Result<Matrix> {
    check_q_shape(mdp, q)?;
    if !(alpha > 0.0) {
        return Err(SoftqError::invalid("alpha must be > 0"));
    }
    let values: Vec<f64> = q.iter().map(|row| log_sum_exp_scaled(row, alpha)).collect();
    let mut out = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let mut acc = 0.0;
            for (s2, &p) in mdp.transition_row(s, a).iter().enumerate() {
                acc += p * values[s2];
            }
            out[s][a] = mdp.reward(s, a) + mdp.gamma() * acc;
        }
    }
    Ok(out)
}

/// Soft value iteration from `q = 0`: iterate the backup until the sup-norm
/// change drops to `tol` or `max_iter` is hit. The returned residual is the
/// honestly measured ‖TQ − Q‖∞ of the final iterate; callers decide what to
/// do with a residual above `tol`.
pub fn soft_value_iteration(
    mdp: &TabularMdp,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SoftSolution> {
    let q0 = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
    soft_value_iteration_from(mdp, q0, alpha, tol, max_iter)
}

/// Soft value iteration from an arbitrary starting point (the fixed point is
/// unique, so the start only affects iteration count).
pub fn soft_value_iteration_from(
    mdp: &TabularMdp,
    q0: Matrix,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SoftSolution> {
    if !(tol > 0.0) {
        return Err(SoftqError::invalid("tol must be > 0"));
    }
    if max_iter < 1 {
        return Err(SoftqError::invalid("max_iter must be ≥ 1"));
    }
    check_q_shape(mdp, &q0)?;
    let mut q = q0;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = soft_bellman_backup(mdp, &q, alpha)?;
        let diff = sup_norm_diff(&next, &q);
        q = next;
        iterations += 1;
        if diff <= tol {
            break;
        }
    }
    let probe = soft_bellman_backup(mdp, &q, alpha)?;
    let residual = sup_norm_diff(&probe, &q);
    let v: Vec<f64> = q.iter().map(|row| log_sum_exp_scaled(row, alpha)).collect();
    let policy = maxent_policy_from_q(&q, &v, alpha)?;
    Ok(SoftSolution {
        q,
        v,
        policy,
        alpha,
        iterations,
        residual,
    })
}

/// Sup-norm distance between two equally shaped matrices.
pub fn sup_norm_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Boltzmann policy `π[s][a] = exp((q[s][a] − v[s])/α)`.
///
/// `v` must be consistent with `q` (within 1e-6 of the log-sum-exp value);
/// rows are renormalized so they sum to 1 exactly up to float error.
pub fn maxent_policy_from_q(q: &Matrix, v: &[f64], alpha: f64) -> Result<Matrix> {
    if !(alpha > 0.0) {
        return Err(SoftqError::invalid("alpha must be > 0"));
    }
    if v.len() != q.len() {
        return Err(SoftqError::invalid("v length does not match Q"));
    }
    let mut policy = Vec::with_capacity(q.len());
    for (row, &vs) in q.iter().zip(v) {
        let expect = soft_value_discrete(row, alpha)?;
        if (expect - vs).abs() > 1e-6 {
            return Err(SoftqError::invalid(format!(
                "v = {vs} inconsistent with soft value {expect}"
            )));
        }
        let mut p: Vec<f64> = row.iter().map(|&qa| ((qa - vs) / alpha).exp()).collect();
        let sum: f64 = p.iter().sum();
        for x in &mut p {
            *x /= sum;
        }
        policy.push(p);
    }
    Ok(policy)
}

fn check_policy(mdp: &TabularMdp, policy: &Matrix) -> Result<()> {
    if policy.len() != mdp.n_states() || policy.iter().any(|r| r.len() != mdp.n_actions()) {
        return Err(SoftqError::invalid("policy shape does not match MDP"));
    }
    for (s, row) in policy.iter().enumerate() {
        if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(SoftqError::invalid(format!("policy row {s} has bad entry")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(SoftqError::invalid(format!(
                "policy row {s} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Entropy `−Σ p ln p` with the `0·ln 0 = 0` convention.
pub fn entropy(row: &[f64]) -> f64 {
    row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Soft Q-value of a fixed policy: the fixed point of
/// `Q^π[s][a] = r[s][a] + γ·Σ_{s'} p(s'|s,a)·(α·H(π(·|s')) + Σ_{a'} π(a'|s')·Q^π[s'][a'])`,
/// iterated until the sup-norm change drops to `tol`.
pub fn evaluate_policy_soft(
    mdp: &TabularMdp,
    policy: &Matrix,
    alpha: f64,
    tol: f64,
) -> Result<Matrix> {
    check_policy(mdp, policy)?;
    if !(alpha > 0.0 && tol > 0.0) {
        return Err(SoftqError::invalid("alpha and tol must be > 0"));
    }
    let entropies: Vec<f64> = policy.iter().map(|row| entropy(row)).collect();
    let mut q = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
    // γ-contraction in sup-norm, so this terminates for any tol > 0.
    loop {
        let state_values: Vec<f64> = (0..mdp.n_states())
            .map(|s| {
                alpha * entropies[s]
                    + policy[s]
                        .iter()
                        .zip(&q[s])
                        .map(|(&p, &qa)| p * qa)
                        .sum::<f64>()
            })
            .collect();
        let mut next = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
        let mut diff: f64 = 0.0;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let mut acc = 0.0;
                for (s2, &p) in mdp.transition_row(s, a).iter().enumerate() {
                    acc += p * state_values[s2];
                }
                next[s][a] = mdp.reward(s, a) + mdp.gamma() * acc;
                diff = diff.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if diff <= tol {
            return Ok(q);
        }
    }
}

/// Boltzmann improvement of a policy: `π̃(a|s) ∝ exp(Q^π(s,a)/α)`.
pub fn boltzmann_improvement(q_pi: &Matrix, alpha: f64) -> Matrix {
    q_pi.iter()
        .map(|row| {
            let v = log_sum_exp_scaled(row, alpha);
            let mut p: Vec<f64> = row.iter().map(|&qa| ((qa - v) / alpha).exp()).collect();
            let sum: f64 = p.iter().sum();
            for x in &mut p {
                *x /= sum;
            }
            p
        })
        .collect()
}

/// On a single-state bandit with α = 1, computes both
///
/// 1. the entropy-regularized policy gradient of the Boltzmann policy
///    `π(a) = exp(E(a) − Ē)` with the baseline choice `b = Ē + 1`, evaluated
///    in closed form over the finite action set, and
/// 2. the soft Bellman-error gradient with the empirical-advantage target
///    `Q̂ = Â + V` under the identification of the energies with the
///    Q-values,
///
/// returning them as a pair. The two are proportional with a positive
/// constant (in this exact evaluation they coincide).
pub fn pg_softq_gradient_pair(
    bandit: &TabularMdp,
    energy_params: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if bandit.n_states() != 1 {
        return Err(SoftqError::invalid(
            "policy-gradient equivalence is defined on single-state MDPs",
        ));
    }
    let n = bandit.n_actions();
    if energy_params.len() != n {
        return Err(SoftqError::invalid("one energy per action required"));
    }
    if !energy_params.iter().all(|e| e.is_finite()) {
        return Err(SoftqError::invalid("non-finite energy"));
    }
    let gamma = bandit.gamma();

    // π = softmax(E), Ē = log Σ exp(E).
    let e_bar = log_sum_exp_scaled(energy_params, 1.0);
    let pi: Vec<f64> = energy_params.iter().map(|&e| (e - e_bar).exp()).collect();
    let h = entropy(&pi);
    let rewards: Vec<f64> = (0..n).map(|a| bandit.reward(0, a)).collect();

    // Exact soft Q of π (α = 1): Q^π(a) = r(a) + γ(H + m) with
    // m = E_π[Q^π] solving m = E_π[r] + γ(H + m).
    let e_r: f64 = pi.iter().zip(&rewards).map(|(&p, &r)| p * r).sum();
    let m = (e_r + gamma * h) / (1.0 - gamma);
    let q_pi: Vec<f64> = rewards.iter().map(|&r| r + gamma * (h + m)).collect();

    // Both gradients share the form g[b] = π(b)·(x(b) − E_π[x]); constant
    // shifts of x are annihilated.
    let weighted = |x: &[f64]| -> Vec<f64> {
        let mean: f64 = pi.iter().zip(x).map(|(&p, &xa)| p * xa).sum();
        pi.iter().zip(x).map(|(&p, &xa)| p * (xa - mean)).collect()
    };

    // Policy gradient: x(a) = Q^π(a) − E(a).
    let x_pg: Vec<f64> = q_pi
        .iter()
        .zip(energy_params)
        .map(|(&q, &e)| q - e)
        .collect();
    let grad_pg = weighted(&x_pg);

    // Soft Bellman-error gradient: x(a) = Â(a) + V − Q(a) with
    // Â(a) = Q^π(a) − log Σ exp(Q^π), V = Ē, Q(a) = E(a).
    let lse_q = log_sum_exp_scaled(&q_pi, 1.0);
    let x_q: Vec<f64> = q_pi
        .iter()
        .zip(energy_params)
        .map(|(&q, &e)| (q - lse_q) + e_bar - e)
        .collect();
    let grad_q = weighted(&x_q);

    Ok((grad_pg, grad_q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state_mdp(rewards: &[f64], gamma: f64) -> TabularMdp {
        let a = rewards.len();
        TabularMdp::new(1, a, vec![1.0; a], rewards.to_vec(), gamma).unwrap()
    }

    #[test]
    fn soft_value_two_equal_terms_is_ln2() {
        let v = soft_value_discrete(&[0.0, 0.0], 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn soft_value_single_action_is_q() {
        let v = soft_value_discrete(&[1.0], 2.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_value_hard_max_limit() {
        let v = soft_value_discrete(&[3.0, 0.0], 1e-8).unwrap();
        assert!((v - 3.0).abs() < 1e-6);
    }

    #[test]
    fn soft_value_rejects_bad_input() {
        assert!(soft_value_discrete(&[], 1.0).is_err());
        assert!(soft_value_discrete(&[f64::NAN], 1.0).is_err());
        assert!(soft_value_discrete(&[0.0], 0.0).is_err());
    }

    #[test]
    fn soft_value_no_overflow_at_large_magnitudes() {
        let v = soft_value_discrete(&[1e6, 1e6 - 1.0], 1.0).unwrap();
        assert!(v.is_finite());
        assert!((v - (1e6 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-6);
    }

    #[test]
    fn backup_zero_prior_value() {
        let mdp = single_state_mdp(&[1.0], 0.9);
        let q = soft_bellman_backup(&mdp, &vec![vec![0.0]], 1.0).unwrap();
        assert!((q[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backup_symmetric_two_actions() {
        let mdp = single_state_mdp(&[1.0, 1.0], 0.5);
        let q = soft_bellman_backup(&mdp, &vec![vec![0.0, 0.0]], 1.0).unwrap();
        let expect = 1.0 + 0.5 * std::f64::consts::LN_2;
        assert!((q[0][0] - expect).abs() < 1e-12);
        assert!((q[0][1] - expect).abs() < 1e-12);
    }

    #[test]
    fn backup_rejects_shape_mismatch() {
        let mdp = single_state_mdp(&[1.0, 1.0], 0.5);
        assert!(soft_bellman_backup(&mdp, &vec![vec![0.0]], 1.0).is_err());
    }

    #[test]
    fn value_iteration_closed_form_fixed_point() {
        // Q* = (r + γ·α·ln n)/(1−γ) when all rewards are equal.
        let mdp = single_state_mdp(&[0.0, 0.0], 0.9);
        let sol = soft_value_iteration(&mdp, 1.0, 1e-12, 10_000).unwrap();
        let expect = 0.9 * std::f64::consts::LN_2 / 0.1;
        assert!((sol.q[0][0] - expect).abs() < 1e-9);
        assert!((sol.q[0][1] - expect).abs() < 1e-9);
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn value_iteration_reports_nonconvergence() {
        let mdp = single_state_mdp(&[5.0], 0.99);
        let sol = soft_value_iteration(&mdp, 1.0, 1e-12, 3).unwrap();
        assert_eq!(sol.iterations, 3);
        assert!(sol.residual > 1e-12);
    }

    #[test]
    fn policy_symmetric_row_is_uniform() {
        let q = vec![vec![1.0, 1.0]];
        let v = vec![soft_value_discrete(&q[0], 0.7).unwrap()];
        let p = maxent_policy_from_q(&q, &v, 0.7).unwrap();
        assert!((p[0][0] - 0.5).abs() < 1e-12);
        assert!((p[0][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn policy_three_to_one_ratio() {
        let alpha = 0.7;
        let q = vec![vec![alpha * 3.0f64.ln(), 0.0]];
        let v = vec![soft_value_discrete(&q[0], alpha).unwrap()];
        let p = maxent_policy_from_q(&q, &v, alpha).unwrap();
        assert!((p[0][0] - 0.75).abs() < 1e-12);
        assert!((p[0][1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn policy_rejects_inconsistent_v() {
        let q = vec![vec![1.0, 2.0]];
        let v = vec![100.0];
        assert!(maxent_policy_from_q(&q, &v, 1.0).is_err());
    }

    #[test]
    fn evaluate_deterministic_policy_constant_reward() {
        // Deterministic policy has zero entropy, so Q^π = c/(1−γ).
        let mdp = TabularMdp::new(
            2,
            2,
            vec![
                // s0: a0 -> s1, a1 -> s0
                0.0, 1.0, 1.0, 0.0, // s1: a0 -> s0, a1 -> s1
                1.0, 0.0, 0.0, 1.0,
            ],
            vec![3.0; 4],
            0.8,
        )
        .unwrap();
        let policy = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let q = evaluate_policy_soft(&mdp, &policy, 1.0, 1e-12).unwrap();
        for row in &q {
            for &x in row {
                assert!((x - 3.0 / 0.2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pg_pair_symmetric_stationary_point_is_zero() {
        let mdp = single_state_mdp(&[2.0, 2.0, 2.0], 0.9);
        let (g1, g2) = pg_softq_gradient_pair(&mdp, &[0.5, 0.5, 0.5]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!(a.abs() < 1e-12);
            assert!(b.abs() < 1e-12);
        }
    }

    #[test]
    fn pg_pair_three_action_bandit_cosine_one() {
        let mdp = single_state_mdp(&[1.0, 0.0, -1.0], 0.9);
        let (g1, g2) = pg_softq_gradient_pair(&mdp, &[0.0, 0.0, 0.0]).unwrap();
        let dot: f64 = g1.iter().zip(&g2).map(|(a, b)| a * b).sum();
        let n1: f64 = g1.iter().map(|a| a * a).sum::<f64>().sqrt();
        let n2: f64 = g2.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(n1 > 0.0 && n2 > 0.0);
        assert!((dot / (n1 * n2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pg_pair_rejects_multi_state() {
        let mdp = TabularMdp::new(
            2,
            1,
            vec![0.5, 0.5, 0.5, 0.5],
            vec![0.0, 0.0],
            0.9,
        )
        .unwrap();
        assert!(pg_softq_gradient_pair(&mdp, &[0.0]).is_err());
    }

    #[test]
    fn mdp_text_round_trip() {
        let mdp = TabularMdp::new(
            2,
            2,
            vec![0.25, 0.75, 1.0, 0.0, 0.5, 0.5, 0.125, 0.875],
            vec![1.5, -0.25, 0.0, 2.0],
            0.9,
        )
        .unwrap();
        let text = mdp.to_text();
        let back = TabularMdp::from_text(&text).unwrap();
        assert_eq!(mdp, back);
    }

    #[test]
    fn mdp_reader_rejects_non_stochastic_rows() {
        let text = "softq-mdp v1\nstates 1\nactions 1\ngamma 0.9\nreward\n1\ntransition\n0.95\n";
        let err = TabularMdp::from_text(text).unwrap_err();
        assert!(err.to_string().contains("sums to"));
    }

    #[test]
    fn mdp_new_validates() {
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![0.9], vec![0.0], 0.9).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![f64::NAN], 0.9).is_err());
    }
}
