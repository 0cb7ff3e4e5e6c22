//! Oracle-equivalence tests for the tabular solvers: every production code
//! path is checked against an independently coded route (dense triple
//! loops, hard value iteration, direct normalizers, closed-form bandit
//! expectations).

use rand::Rng as _;
use softq::env::{generate_random_mdp, MdpGenSpec};
use softq::oracle_suite::{
    check_contraction, check_hard_limit, check_policy_consistency, check_policy_improvement,
    check_uniform_limit, check_uniqueness, finite_horizon_soft_q, hard_value_iteration,
};
use softq::rng::{substream, Stream};
use softq::tabular::{
    boltzmann_improvement, evaluate_policy_soft, pg_softq_gradient_pair, soft_bellman_backup,
    soft_value_iteration, sup_norm_diff, Matrix, TabularMdp,
};

/// Independent dense evaluation of the soft backup: explicit triple loops
/// and its own max-shifted log-sum-exp, mirroring the defining equations.
fn dense_backup_oracle(mdp: &TabularMdp, q: &Matrix, alpha: f64) -> Matrix {
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    let mut values = vec![0.0; s_n];
    for s in 0..s_n {
        let mut m = f64::NEG_INFINITY;
        for &x in &q[s] {
            if x > m {
                m = x;
            }
        }
        let mut sum = 0.0;
        for &x in &q[s] {
            sum += ((x - m) / alpha).exp();
        }
        values[s] = m + alpha * sum.ln();
    }
    let mut out = vec![vec![0.0; a_n]; s_n];
    for s in 0..s_n {
        for a in 0..a_n {
            let mut acc = 0.0;
            for (s2, v) in values.iter().enumerate() {
                acc += mdp.transition(s, a, s2) * v;
            }
            out[s][a] = mdp.reward(s, a) + mdp.gamma() * acc;
        }
    }
    out
}

#[test]
fn backup_matches_dense_triple_loop_exactly() {
    let mdp = generate_random_mdp(&MdpGenSpec::dense(3, 2, 0.9, 17)).unwrap();
    let mut rng = substream(18, Stream::Env);
    for _ in 0..20 {
        let q: Matrix = (0..3)
            .map(|_| (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let ours = soft_bellman_backup(&mdp, &q, 0.7).unwrap();
        let oracle = dense_backup_oracle(&mdp, &q, 0.7);
        assert_eq!(ours, oracle, "backup must equal the dense evaluation exactly");
    }
}

#[test]
fn soft_vi_at_tiny_alpha_matches_hard_vi() {
    let mdp = generate_random_mdp(&MdpGenSpec::dense(4, 3, 0.9, 23)).unwrap();
    let soft = soft_value_iteration(&mdp, 1e-6, 1e-10, 100_000).unwrap();
    let hard = hard_value_iteration(&mdp, 1e-12, 100_000);
    assert!(
        sup_norm_diff(&soft.q, &hard) < 1e-3,
        "gap {}",
        sup_norm_diff(&soft.q, &hard)
    );
}

#[test]
fn iteration_count_respects_contraction_bound() {
    // Nonnegative rewards keep the iterates monotone from q = 0, so the
    // contraction-rate bound on the stopping step applies.
    for seed in [1u64, 2, 3, 4, 5] {
        let spec = MdpGenSpec {
            reward_min: 0.5,
            reward_max: 1.0,
            ..MdpGenSpec::dense(4, 3, 0.9, seed)
        };
        let mdp = generate_random_mdp(&spec).unwrap();
        let exact = soft_value_iteration(&mdp, 1.0, 1e-13, 500_000).unwrap();
        let q_star_norm = exact
            .q
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()));
        let tol = 1e-6;
        let bound = ((q_star_norm / tol).ln() / (1.0f64 / 0.9).ln()).ceil() as usize + 1;
        let sol = soft_value_iteration(&mdp, 1.0, tol, 500_000).unwrap();
        assert!(
            sol.iterations <= bound,
            "seed {seed}: {} iterations > bound {bound}",
            sol.iterations
        );
    }
}

#[test]
fn optimal_policy_evaluation_recovers_the_fixed_point() {
    // Soft policy evaluation of the Boltzmann-optimal policy must land on
    // the optimal soft Q.
    let mdp = generate_random_mdp(&MdpGenSpec::dense(5, 3, 0.9, 31)).unwrap();
    let tol = 1e-11;
    let sol = soft_value_iteration(&mdp, 0.7, tol, 200_000).unwrap();
    let q_pi = evaluate_policy_soft(&mdp, &sol.policy, 0.7, tol).unwrap();
    assert!(
        sup_norm_diff(&q_pi, &sol.q) <= 10.0 * tol,
        "gap {}",
        sup_norm_diff(&q_pi, &sol.q)
    );
}

#[test]
fn boltzmann_improvement_dominates_uniform_policy() {
    // Theorem-style monotone improvement, checked numerically.
    let mdp = generate_random_mdp(&MdpGenSpec::dense(4, 3, 0.9, 37)).unwrap();
    let uniform = vec![vec![1.0 / 3.0; 3]; 4];
    let q_pi = evaluate_policy_soft(&mdp, &uniform, 1.0, 1e-12).unwrap();
    let improved = boltzmann_improvement(&q_pi, 1.0);
    let q_improved = evaluate_policy_soft(&mdp, &improved, 1.0, 1e-12).unwrap();
    for (row_new, row_old) in q_improved.iter().zip(&q_pi) {
        for (&qn, &qo) in row_new.iter().zip(row_old) {
            assert!(qn >= qo - 1e-8, "improvement violated: {qn} < {qo}");
        }
    }
}

#[test]
fn policy_gradient_pair_proportional_on_random_bandits() {
    // 100 seeded random bandit instances: the exact entropy-regularized
    // policy gradient and the advantage-form soft Bellman gradient must be
    // positively proportional.
    let mut rng = substream(41, Stream::Env);
    let mut nontrivial = 0;
    for i in 0..100 {
        let n_actions = rng.gen_range(2..=5);
        let gamma = rng.gen_range(0.3..0.95);
        let rewards: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let energies: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bandit =
            TabularMdp::new(1, n_actions, vec![1.0; n_actions], rewards, gamma).unwrap();
        let (g_pg, g_q) = pg_softq_gradient_pair(&bandit, &energies).unwrap();

        let dot: f64 = g_pg.iter().zip(&g_q).map(|(a, b)| a * b).sum();
        let n_pg: f64 = g_pg.iter().map(|a| a * a).sum::<f64>().sqrt();
        let n_q: f64 = g_q.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n_pg < 1e-12 || n_q < 1e-12 {
            continue;
        }
        nontrivial += 1;
        let cosine = dot / (n_pg * n_q);
        assert!(cosine > 1.0 - 1e-9, "instance {i}: cosine {cosine}");
        // Positive proportionality: g_pg ≈ c·g_q with c = ⟨g_pg,g_q⟩/⟨g_q,g_q⟩.
        let c = dot / (n_q * n_q);
        assert!(c > 0.0, "instance {i}: scale {c} not positive");
        for (a, b) in g_pg.iter().zip(&g_q) {
            assert!(
                (a - c * b).abs() <= 1e-8 * n_pg.max(1e-30),
                "instance {i}: proportionality residual"
            );
        }
    }
    assert!(nontrivial > 80, "only {nontrivial} informative instances");
}

#[test]
fn property_battery_on_mixed_sizes() {
    let mut rng = substream(47, Stream::Env);
    for (i, &(s, a)) in [(1usize, 1usize), (2, 4), (6, 2), (5, 4)].iter().enumerate() {
        let mdp = generate_random_mdp(&MdpGenSpec::dense(s, a, 0.9, 100 + i as u64)).unwrap();
        for r in [
            check_contraction(&mdp, 1.0, 100, &mut rng).unwrap(),
            check_policy_improvement(&mdp, 1.0, &mut rng).unwrap(),
            check_hard_limit(&mdp).unwrap(),
            check_uniqueness(&mdp, 1.0, &mut rng).unwrap(),
        ] {
            assert!(r.pass, "{s}x{a} {}: {}", r.property, r.detail);
        }
    }
    let r = check_policy_consistency(0.7, 1000, &mut rng).unwrap();
    assert!(r.pass, "{}", r.detail);
    for &(s, a) in &[(3usize, 3usize), (6, 4)] {
        let r = check_uniform_limit(7, s, a).unwrap();
        assert!(r.pass, "uniform limit {s}x{a}: {}", r.detail);
    }
}

#[test]
fn single_action_mdp_soft_equals_hard_for_any_alpha() {
    // With one action the log-sum-exp collapses and entropy is zero, so the
    // soft and hard fixed points coincide; compare state-value differences.
    let spec = MdpGenSpec::dense(5, 1, 0.9, 53);
    let mdp = generate_random_mdp(&spec).unwrap();
    let hard = hard_value_iteration(&mdp, 1e-12, 200_000);
    for alpha in [0.1, 1.0, 10.0] {
        let soft = soft_value_iteration(&mdp, alpha, 1e-12, 200_000).unwrap();
        for s in 1..5 {
            let d_soft = soft.q[s][0] - soft.q[0][0];
            let d_hard = hard[s][0] - hard[0][0];
            assert!(
                (d_soft - d_hard).abs() < 1e-9,
                "alpha {alpha}: value-difference gap {}",
                (d_soft - d_hard).abs()
            );
        }
    }
}

#[test]
fn vi_fixed_point_matches_finite_horizon_brute_force() {
    for seed in [61u64, 62, 63] {
        let mdp = generate_random_mdp(&MdpGenSpec::dense(6, 4, 0.9, seed)).unwrap();
        for alpha in [0.1, 1.0, 10.0] {
            let sol = soft_value_iteration(&mdp, alpha, 1e-10, 200_000).unwrap();
            let brute = finite_horizon_soft_q(&mdp, alpha, 300);
            assert!(
                sup_norm_diff(&sol.q, &brute) < 1e-4,
                "seed {seed} alpha {alpha}: gap {}",
                sup_norm_diff(&sol.q, &brute)
            );
        }
    }
}
