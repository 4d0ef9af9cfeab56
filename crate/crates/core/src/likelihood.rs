// SPDX-License-Identifier: Apache-2.0

//! Bernoulli likelihood models, KL divergences and expected log-likelihood ratios.
//!
//! Under hypothesis `θ` agent `k` observes `0` with probability `p_k(θ)` and
//! `1` otherwise. Log-ratio matrices are laid out N×(H−1): one column per
//! hypothesis other than the reference, in increasing hypothesis order.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower/upper clamp on every Bernoulli parameter.
pub const EPS_MIN: f64 = 0.05;
/// Probability of observing `0` under the reference hypothesis.
pub const REFERENCE_P: f64 = 0.3;
pub const SIGMA2_WEAK: f64 = 0.05;
pub const SIGMA2_MODERATE: f64 = 0.2;
pub const SIGMA2_INFLUENTIAL: f64 = 0.5;
pub const MAX_REJECTIONS: usize = 1000;

pub type Observation = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSet {
    count: usize,
    reference: usize,
    truth: usize,
}

impl HypothesisSet {
    pub fn new(count: usize, reference: usize, truth: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 hypotheses, got {count}"
            )));
        }
        if reference >= count || truth >= count {
            return Err(Error::InvalidParameter(format!(
                "hypothesis index out of range (reference {reference}, truth {truth}, count {count})"
            )));
        }
        Ok(Self {
            count,
            reference,
            truth,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn truth(&self) -> usize {
        self.truth
    }

    pub fn with_truth(self, truth: usize) -> Result<Self> {
        Self::new(self.count, self.reference, truth)
    }

    /// Column of hypothesis `h` in a log-ratio matrix, `None` for the reference.
    pub fn column_of(&self, h: usize) -> Option<usize> {
        column_of(h, self.reference)
    }

    pub fn hypothesis_of(&self, column: usize) -> usize {
        hypothesis_of(column, self.reference)
    }
}

pub fn column_of(h: usize, reference: usize) -> Option<usize> {
    use std::cmp::Ordering::*;
    match h.cmp(&reference) {
        Less => Some(h),
        Equal => None,
        Greater => Some(h - 1),
    }
}

pub fn hypothesis_of(column: usize, reference: usize) -> usize {
    if column < reference {
        column
    } else {
        column + 1
    }
}

/// `p ln(p/p′) + (1−p) ln((1−p)/(1−p′))`.
pub fn bernoulli_kl(p: f64, p_prime: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, p_prime) + term(1.0 - p, 1.0 - p_prime)
}

/// Per-agent, per-hypothesis Bernoulli parameters together with the hypothesis set.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    hypotheses: HypothesisSet,
    /// `p[k][θ]`: probability that agent `k` observes `0` under `θ`.
    p: Vec<Vec<f64>>,
    /// `ln L_k(ζ|θ)` at index `(2k + ζ)·H + θ`.
    log_lik: Vec<f64>,
}

impl LikelihoodModel {
    pub fn new(hypotheses: HypothesisSet, p: Vec<Vec<f64>>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyInput("likelihood table has no agents".into()));
        }
        for (k, row) in p.iter().enumerate() {
            if row.len() != hypotheses.count() {
                return Err(Error::DimensionMismatch(format!(
                    "agent {k} has {} parameters, expected {}",
                    row.len(),
                    hypotheses.count()
                )));
            }
            if row.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(Error::InvalidParameter(format!(
                    "agent {k} has a parameter outside (0, 1)"
                )));
            }
        }
        let h = hypotheses.count();
        let mut log_lik = Vec::with_capacity(2 * h * p.len());
        for row in &p {
            log_lik.extend(row.iter().map(|x| x.ln()));
            log_lik.extend(row.iter().map(|x| (1.0 - x).ln()));
        }
        debug_assert_eq!(log_lik.len(), 2 * h * p.len());
        Ok(Self {
            hypotheses,
            p,
            log_lik,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.p.len()
    }

    pub fn hypotheses(&self) -> HypothesisSet {
        self.hypotheses
    }

    pub fn n_hypotheses(&self) -> usize {
        self.hypotheses.count()
    }

    pub fn reference(&self) -> usize {
        self.hypotheses.reference()
    }

    pub fn truth(&self) -> usize {
        self.hypotheses.truth()
    }

    pub fn with_truth(&self, truth: usize) -> Result<Self> {
        Ok(Self {
            hypotheses: self.hypotheses.with_truth(truth)?,
            p: self.p.clone(),
            log_lik: self.log_lik.clone(),
        })
    }

    pub fn p(&self, k: usize, theta: usize) -> f64 {
        self.p[k][theta]
    }

    pub fn parameters(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn likelihood(&self, k: usize, obs: Observation, theta: usize) -> f64 {
        let p = self.p[k][theta];
        if obs == 0 {
            p
        } else {
            1.0 - p
        }
    }

    /// `ln L_k(obs|θ)` for all `θ`.
    pub fn log_likelihoods(&self, k: usize, obs: Observation) -> &[f64] {
        let h = self.n_hypotheses();
        let start = (2 * k + usize::from(obs != 0)) * h;
        &self.log_lik[start..start + h]
    }

    pub fn kl_divergence(&self, k: usize, theta_a: usize, theta_b: usize) -> f64 {
        bernoulli_kl(self.p[k][theta_a], self.p[k][theta_b])
    }

    /// KL sums `Σ_θ D(L_k(θ★)‖L_k(θ))` for every agent.
    pub fn kl_sums(&self, theta_star: usize) -> Vec<f64> {
        (0..self.n_agents())
            .map(|k| {
                (0..self.n_hypotheses())
                    .map(|t| self.kl_divergence(k, theta_star, t))
                    .sum()
            })
            .collect()
    }

    /// `0` with probability `p_k(θ_true)`, else `1`.
    pub fn sample_observation<R: Rng + ?Sized>(
        &self,
        k: usize,
        theta_true: usize,
        rng: &mut R,
    ) -> Observation {
        if rng.random::<f64>() < self.p[k][theta_true] {
            0
        } else {
            1
        }
    }

    /// Entry `j` is `ln L_k(obs|θ_ref) − ln L_k(obs|θ_j)` over non-reference hypotheses.
    pub fn llr_row(&self, k: usize, obs: Observation, reference: usize) -> Vec<f64> {
        let base = self.likelihood(k, obs, reference).ln();
        (0..self.n_hypotheses())
            .filter(|&t| t != reference)
            .map(|t| base - self.likelihood(k, obs, t).ln())
            .collect()
    }

    /// `b = max |ln L(ζ|θ) / L(ζ|θ′)|` over agents, observations and hypothesis pairs.
    pub fn llr_bound(&self) -> f64 {
        let mut b: f64 = 0.0;
        for row in &self.p {
            for &a in row {
                for &c in row {
                    b = b
                        .max((a / c).ln().abs())
                        .max(((1.0 - a) / (1.0 - c)).ln().abs());
                }
            }
        }
        b
    }

    /// `L̄[k, j] = D(L_k(θ★)‖L_k(θ_j)) − D(L_k(θ★)‖L_k(θ_ref))`.
    pub fn expected_llr_matrix(&self, theta_star: usize) -> DMatrix<f64> {
        let reference = self.reference();
        let h = self.n_hypotheses();
        DMatrix::from_fn(self.n_agents(), h - 1, |k, col| {
            let theta = hypothesis_of(col, reference);
            self.kl_divergence(k, theta_star, theta) - self.kl_divergence(k, theta_star, reference)
        })
    }

    /// Every wrong hypothesis is distinguishable by at least one agent.
    pub fn is_identifiable(&self, theta_star: usize) -> bool {
        (0..self.n_hypotheses())
            .filter(|&t| t != theta_star)
            .all(|t| (0..self.n_agents()).any(|k| self.kl_divergence(k, theta_star, t) > 0.0))
    }
}

/// σ² profile with `high` on the listed agents and `low` elsewhere.
pub fn planted_sigma2(n: usize, influential: &[usize], high: f64, low: f64) -> Vec<f64> {
    (0..n)
        .map(|k| if influential.contains(&k) { high } else { low })
        .collect()
}

/// Random Bernoulli models: the reference hypothesis keeps `(0.3, 0.7)` for
/// every agent; every other `(k, θ)` draws two standard normals `ε_p, ε_q` and
/// sets `(p, q) ∝ (0.3 + σ_k² ε_p, 0.7 + σ_k² ε_q)`, rejecting draws with a
/// non-positive component or `p` outside `[0.05, 0.95]`.
///
/// Draw order: one `ChaCha8Rng` seeded with `seed`, agents outer, hypotheses
/// inner (reference skipped), `ε_p` drawn before `ε_q` on every attempt.
pub fn generate_models(
    hypotheses: HypothesisSet,
    sigma2: &[f64],
    seed: u64,
) -> Result<LikelihoodModel> {
    if sigma2.is_empty() {
        return Err(Error::EmptyInput("σ² profile has no agents".into()));
    }
    if let Some(k) = sigma2.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "σ² of agent {k} must be positive"
        )));
    }
    let reference = hypotheses.reference();
    let q_ref = 1.0 - REFERENCE_P;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Vec::with_capacity(sigma2.len());
    for (k, &s2) in sigma2.iter().enumerate() {
        let mut row = vec![REFERENCE_P; hypotheses.count()];
        for (theta, slot) in row.iter_mut().enumerate() {
            if theta == reference {
                continue;
            }
            let mut accepted = None;
            for _ in 0..MAX_REJECTIONS {
                let eps_p: f64 = rng.sample(StandardNormal);
                let eps_q: f64 = rng.sample(StandardNormal);
                let a = REFERENCE_P + s2 * eps_p;
                let b = q_ref + s2 * eps_q;
                if a <= 0.0 || b <= 0.0 {
                    continue;
                }
                let p = a / (a + b);
                if (EPS_MIN..=1.0 - EPS_MIN).contains(&p) {
                    accepted = Some(p);
                    break;
                }
            }
            *slot = accepted.ok_or(Error::RejectionExhausted {
                agent: k,
                hypothesis: theta,
                attempts: MAX_REJECTIONS,
            })?;
        }
        table.push(row);
    }
    LikelihoodModel::new(hypotheses, table)
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    #[serde(rename = "H")]
    h: usize,
    theta_star: usize,
    theta_ref: usize,
    p: Vec<Vec<f64>>,
}

impl Serialize for LikelihoodModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelJson {
            h: self.n_hypotheses(),
            theta_star: self.truth(),
            theta_ref: self.reference(),
            p: self.p.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LikelihoodModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ModelJson::deserialize(d)?;
        let hyp =
            HypothesisSet::new(j.h, j.theta_ref, j.theta_star).map_err(serde::de::Error::custom)?;
        LikelihoodModel::new(hyp, j.p).map_err(serde::de::Error::custom)
    }
}
