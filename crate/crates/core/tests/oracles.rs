// SPDX-License-Identifier: Apache-2.0

//! Library results checked against independent re-implementations.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use social_learning::graph::{
    centrality, generate_erdos_renyi, normalize_learned_matrix, perturb_topology,
    uniform_combination_matrix, CombinationMatrix, DirectedGraph,
};
use social_learning::influence::{rank_agents, recover_kl};
use social_learning::learner::{
    analytic_gradient, delta_matrix, llr_estimate, risk_gradient, soft_threshold,
};
use social_learning::likelihood::{bernoulli_kl, generate_models, HypothesisSet, LikelihoodModel};
use social_learning::simulator::{
    adapt_step, belief_from_log_ratios, combine_step, log_belief_matrix, BeliefState,
    SimulationConfig, Simulator,
};

fn reachability(n: usize, adj: &[bool]) -> bool {
    let mut r: Vec<bool> = adj.to_vec();
    for i in 0..n {
        r[i * n + i] = true;
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i * n + m] && r[m * n + j] {
                    r[i * n + j] = true;
                }
            }
        }
    }
    r.into_iter().all(|x| x)
}

fn reference_er(n: usize, p: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut adj = vec![false; n * n];
        for l in 0..n {
            for k in 0..n {
                if l != k {
                    adj[l * n + k] = rng.random::<f64>() < p;
                } else {
                    adj[l * n + k] = true;
                }
            }
        }
        if reachability(n, &adj) {
            return adj;
        }
    }
}

#[test]
fn erdos_renyi_reproduces_reference_draws() {
    for seed in 0..20 {
        let g = generate_erdos_renyi(9, 0.2, seed).unwrap();
        assert_eq!(
            g.adjacency(),
            reference_er(9, 0.2, seed).as_slice(),
            "seed {seed}"
        );
    }
}

#[test]
fn perturbation_reproduces_reference_draws() {
    let g = generate_erdos_renyi(10, 0.3, 4).unwrap();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let expected = loop {
            let mut adj = g.adjacency().to_vec();
            for l in 0..10 {
                for k in 0..10 {
                    if l != k && rng.random::<f64>() < 0.05 {
                        adj[l * 10 + k] = !adj[l * 10 + k];
                    }
                }
            }
            if reachability(10, &adj) {
                break adj;
            }
        };
        assert_eq!(
            perturb_topology(&g, 0.05, seed).unwrap().adjacency(),
            expected.as_slice()
        );
    }
}

#[test]
fn uniform_weights_follow_in_degree() {
    let g = generate_erdos_renyi(12, 0.25, 8).unwrap();
    let a = uniform_combination_matrix(&g);
    for k in 0..12 {
        let deg = (0..12).filter(|&l| g.adjacency()[l * 12 + k]).count() as f64;
        for l in 0..12 {
            let want = if g.adjacency()[l * 12 + k] {
                1.0 / deg
            } else {
                0.0
            };
            assert_eq!(a.weights()[(l, k)], want);
        }
    }
}

#[test]
fn models_reproduce_reference_draws() {
    let sigma2 = [0.5, 0.05, 0.2, 0.05];
    let m = generate_models(HypothesisSet::new(4, 0, 0).unwrap(), &sigma2, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (k, s) in sigma2.iter().enumerate() {
        assert_eq!(m.p(k, 0), 0.3);
        for t in 1..4 {
            let p = loop {
                let ep: f64 = rng.sample(StandardNormal);
                let eq: f64 = rng.sample(StandardNormal);
                let (a, b) = (0.3 + s * ep, 0.7 + s * eq);
                if a > 0.0 && b > 0.0 {
                    let p = a / (a + b);
                    if (0.05..=0.95).contains(&p) {
                        break p;
                    }
                }
            };
            assert_eq!(m.p(k, t), p, "agent {k}, hypothesis {t}");
        }
    }
}

#[test]
fn perron_vector_solves_eigen_system() {
    for seed in 0..5 {
        let a = uniform_combination_matrix(&generate_erdos_renyi(15, 0.2, seed).unwrap());
        // (A − I)u = 0 with the last equation replaced by Σu = 1
        let mut sys = a.weights() - DMatrix::identity(15, 15);
        let mut rhs = nalgebra::DVector::zeros(15);
        sys.row_mut(14).fill(1.0);
        rhs[14] = 1.0;
        let u = sys.lu().solve(&rhs).unwrap();
        let got = centrality(&a).unwrap();
        for k in 0..15 {
            assert!(
                (got[k] - u[k]).abs() < 1e-10,
                "seed {seed}, agent {k}: {} vs {}",
                got[k],
                u[k]
            );
        }
    }
}

#[test]
fn bernoulli_kl_closed_form() {
    for &(p, q) in &[(0.3f64, 0.6f64), (0.9, 0.1), (0.5, 0.5), (0.05, 0.95)] {
        let f: f64 = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        assert!((bernoulli_kl(p, q) - f).abs() < 1e-15);
    }
}

fn small_models() -> LikelihoodModel {
    LikelihoodModel::new(
        HypothesisSet::new(3, 0, 1).unwrap(),
        vec![
            vec![0.3, 0.6, 0.2],
            vec![0.3, 0.35, 0.45],
            vec![0.3, 0.8, 0.1],
        ],
    )
    .unwrap()
}

#[test]
fn expected_llr_matches_monte_carlo() {
    let m = small_models();
    let lbar = m.expected_llr_matrix(1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 200_000;
    for k in 0..3 {
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let obs = m.sample_observation(k, 1, &mut rng);
            for (c, x) in m.llr_row(k, obs, 0).into_iter().enumerate() {
                sum[c] += x;
                sq[c] += x * x;
            }
        }
        for c in 0..2 {
            let mean = sum[c] / n as f64;
            let se = ((sq[c] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!(
                (mean - lbar[(k, c)]).abs() < 5.0 * se + 1e-12,
                "agent {k} col {c}: {mean} vs {}",
                lbar[(k, c)]
            );
        }
    }
}

/// Probability-domain recursion written from scratch.
fn scalar_step(
    mu: &[Vec<f64>],
    obs: &[u8],
    m: &LikelihoodModel,
    a: &DMatrix<f64>,
    delta: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = mu.len();
    let h = mu[0].len();
    let mut psi = vec![vec![0.0; h]; n];
    for k in 0..n {
        for t in 0..h {
            let p = m.p(k, t);
            let lik = if obs[k] == 0 { p } else { 1.0 - p };
            psi[k][t] = lik.powf(delta) * mu[k][t].powf(1.0 - delta);
        }
        let z: f64 = psi[k].iter().sum();
        psi[k].iter_mut().for_each(|x| *x /= z);
    }
    let mut out = vec![vec![1.0; h]; n];
    for k in 0..n {
        for t in 0..h {
            for l in 0..n {
                out[k][t] *= psi[l][t].powf(a[(l, k)]);
            }
        }
        let z: f64 = out[k].iter().sum();
        out[k].iter_mut().for_each(|x| *x /= z);
    }
    (psi, out)
}

#[test]
fn recursion_matches_scalar_oracle() {
    let m = small_models();
    let a = uniform_combination_matrix(
        &DirectedGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0), (1, 0)]).unwrap(),
    );
    let delta = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = BeliefState::uniform(3, 3);
    let mut mu = vec![vec![1.0 / 3.0; 3]; 3];
    for _ in 0..200 {
        let obs: Vec<u8> = (0..3)
            .map(|k| m.sample_observation(k, 1, &mut rng))
            .collect();
        let (psi, next) = scalar_step(&mu, &obs, &m, a.weights(), delta);
        state.log_public = adapt_step(&state.log_private, &obs, &m, delta);
        state.log_private = combine_step(&state.log_public, &a);
        for k in 0..3 {
            for t in 0..3 {
                assert!((state.public_belief(k)[t] - psi[k][t]).abs() < 1e-12);
                assert!((state.private_belief(k)[t] - next[k][t]).abs() < 1e-12);
            }
            let lam = log_belief_matrix(&state.log_public, 0);
            assert!((lam[(k, 1)] - (psi[k][0] / psi[k][2]).ln()).abs() < 1e-10);
        }
        mu = next;
    }
}

#[test]
fn log_beliefs_stay_bounded() {
    let g = generate_erdos_renyi(10, 0.3, 2).unwrap();
    let m = generate_models(HypothesisSet::new(4, 0, 2).unwrap(), &[0.5; 10], 6).unwrap();
    let bound = m.llr_bound();
    let mut sim = Simulator::new(&SimulationConfig::new(
        uniform_combination_matrix(&g),
        m,
        0.1,
        3000,
        1,
    ))
    .unwrap();
    for _ in 0..3000 {
        let s = sim.step().unwrap();
        assert!(s.lambda.amax() <= bound + 1e-12);
    }
}

#[test]
fn kl_recovery_from_exact_llr() {
    let m = small_models();
    for star in 0..3 {
        let kl = recover_kl(&m.expected_llr_matrix(star), star, 0);
        for k in 0..3 {
            for t in 0..3 {
                let want = bernoulli_kl(m.p(k, star), m.p(k, t));
                assert!((kl[k][t] - want).abs() < 1e-12);
            }
        }
    }
}

fn matrix(n: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0..3.0f64, n * c).prop_map(move |v| DMatrix::from_vec(n, c, v))
}

proptest! {
    #[test]
    fn learned_matrix_normalizes_to_left_stochastic(raw in matrix(5, 5)) {
        let a = normalize_learned_matrix(&raw);
        let w = a.weights();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        for k in 0..5 {
            prop_assert!((w.column(k).sum() - 1.0).abs() < 1e-12);
        }
        prop_assert!(CombinationMatrix::new(w.clone()).is_ok());
    }

    #[test]
    fn log_ratio_round_trip(logits in prop::collection::vec(-20.0..20.0f64, 4), reference in 0usize..4) {
        let z = logits.iter().map(|x| x.exp()).sum::<f64>().ln();
        let logp = DMatrix::from_row_slice(1, 4, &logits.iter().map(|x| x - z).collect::<Vec<_>>());
        let lam = log_belief_matrix(&logp, reference);
        let back = belief_from_log_ratios(&lam.row(0).iter().copied().collect::<Vec<_>>(), reference);
        prop_assert!((back.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for t in 0..4 {
            prop_assert!((back[t] - logp[(0, t)].exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn ranking_is_scale_invariant(v in prop::collection::vec(0.0..1.0f64, 1..12), s in 0.01..100.0f64) {
        let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
        prop_assert_eq!(rank_agents(&v), rank_agents(&scaled));
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero(m in matrix(4, 4), t in 0.0..1.0f64) {
        let s = soft_threshold(&m, t);
        for (x, y) in m.iter().zip(s.iter()) {
            prop_assert!(y.abs() <= x.abs());
            prop_assert!((x.abs() - y.abs() - t.min(x.abs())).abs() < 1e-12);
            prop_assert!(*y == 0.0 || y.signum() == x.signum());
        }
    }

    #[test]
    fn gradient_forms_agree_with_window_estimate(
        w in prop::collection::vec(matrix(3, 2), 6),
        a in matrix(3, 3),
        delta in 0.01..0.5f64,
    ) {
        // Window of M + 1 = 5 entries ending at Λ_{i−1}; Λ_i is the sixth.
        let window = &w[..5];
        let lambda = &w[5];
        let prev = &w[4];
        let mut next = window[1..].to_vec();
        next.push(lambda.clone());
        let llr = llr_estimate(window, &a, delta).unwrap();
        let d_prev = delta_matrix(window).unwrap();
        let d_cur = delta_matrix(&next).unwrap();
        let g = analytic_gradient(lambda, prev, &d_prev, &llr, &a, delta);
        let r = risk_gradient(&d_cur, &d_prev, &a, delta);
        prop_assert!((g - r).amax() < 1e-9);
    }
}
