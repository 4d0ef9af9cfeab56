// SPDX-License-Identifier: Apache-2.0

//! Agent influence from learned quantities: centrality of the learned
//! combination matrix times the KL divergences recovered from `L̂`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{centrality, normalize_learned_matrix, CombinationMatrix, PerronVector};
use crate::likelihood::{column_of, LikelihoodModel};
use crate::simulator::{belief_from_log_ratios, majority_vote, map_estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    /// Estimated (or true) state `θ★`, index `j′`.
    pub theta_star: usize,
    pub centrality: Vec<f64>,
    /// `kl[k][θ] ≈ D(L_k(θ★)‖L_k(θ))`, zero at `θ★`.
    pub kl: Vec<Vec<f64>>,
    /// `K_k(θ★, θ) = u_k kl[k][θ]`.
    pub contributions: Vec<Vec<f64>>,
    /// `I_k = Σ_θ K_k(θ★, θ)`.
    pub informativeness: Vec<f64>,
    /// `I_k` rescaled to sum one, for display.
    pub normalized_informativeness: Vec<f64>,
    /// Agents by decreasing `I_k`.
    pub ranking: Vec<usize>,
}

impl InfluenceReport {
    pub fn from_parts(theta_star: usize, u: &PerronVector, kl: Vec<Vec<f64>>) -> Self {
        let contributions: Vec<Vec<f64>> = kl
            .iter()
            .enumerate()
            .map(|(k, row)| row.iter().map(|d| u[k] * d).collect())
            .collect();
        let informativeness = informativeness(u, &kl);
        let ranking = rank_agents(&informativeness);
        Self {
            theta_star,
            centrality: u.as_slice().to_vec(),
            normalized_informativeness: normalize_sum(&informativeness),
            kl,
            contributions,
            informativeness,
            ranking,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.centrality.len()
    }

    /// 1-based position of every agent in the ranking.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.ranking.len()];
        for (pos, &k) in self.ranking.iter().enumerate() {
            r[k] = pos + 1;
        }
        r
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.ranking[..k.min(self.ranking.len())]
    }

    pub fn network_divergence(&self, theta: usize) -> f64 {
        self.contributions.iter().map(|row| row[theta]).sum()
    }

    /// CSV with header `agent_id,u,I,rank,kl_0,…,kl_{H−1}`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let h = self.kl.first().map_or(0, Vec::len);
        let mut header = vec![
            "agent_id".to_string(),
            "u".into(),
            "I".into(),
            "rank".into(),
        ];
        header.extend((0..h).map(|t| format!("kl_{t}")));
        w.write_record(&header)?;
        let ranks = self.ranks();
        for k in 0..self.n_agents() {
            let mut rec = vec![
                k.to_string(),
                self.centrality[k].to_string(),
                self.informativeness[k].to_string(),
                ranks[k].to_string(),
            ];
            rec.extend(self.kl[k].iter().map(|d| d.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Majority vote of per-agent MAP estimates reconstructed from one log-belief matrix.
pub fn estimate_true_state(lambda: &DMatrix<f64>, reference: usize) -> usize {
    let estimates: Vec<usize> = lambda
        .row_iter()
        .map(|row| {
            let r: Vec<f64> = row.iter().copied().collect();
            map_estimate(&belief_from_log_ratios(&r, reference))
        })
        .collect();
    majority_vote(&estimates, lambda.ncols() + 1)
}

/// KL divergences against the estimated state `j′` from an `L̂` estimate.
///
/// `D(θ★‖θ_ref) = −L̂[k, j′]` and `D(θ★‖θ_j) = L̂[k, j] − L̂[k, j′]`, where
/// the `j′` column is taken as zero when `j′` is the reference. Negative
/// values are clipped to zero.
pub fn recover_kl(llr: &DMatrix<f64>, j_prime: usize, reference: usize) -> Vec<Vec<f64>> {
    let h = llr.ncols() + 1;
    let star_col = column_of(j_prime, reference);
    (0..llr.nrows())
        .map(|k| {
            let star = star_col.map_or(0.0, |c| llr[(k, c)]);
            (0..h)
                .map(|theta| {
                    if theta == j_prime {
                        return 0.0;
                    }
                    let v = match column_of(theta, reference) {
                        None => -star,
                        Some(c) => llr[(k, c)] - star,
                    };
                    v.max(0.0)
                })
                .collect()
        })
        .collect()
}

/// `K(θ★, θ) = Σ_k u_k D_k(θ★‖θ)`.
pub fn network_divergence(u: &PerronVector, kl: &[Vec<f64>], theta: usize) -> f64 {
    kl.iter()
        .enumerate()
        .map(|(k, row)| u[k] * row[theta])
        .sum()
}

/// `I_k = u_k Σ_θ D_k(θ★‖θ)`.
pub fn informativeness(u: &PerronVector, kl: &[Vec<f64>]) -> Vec<f64> {
    kl.iter()
        .enumerate()
        .map(|(k, row)| u[k] * row.iter().sum::<f64>())
        .collect()
}

pub fn normalize_sum(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter().map(|x| x / s).collect()
    } else {
        v.to_vec()
    }
}

/// Agent indices by decreasing value, ties by index.
pub fn rank_agents(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Influence report from a raw learned matrix, its `L̂`, and the final log-belief matrix.
pub fn analyze(
    a_learned: &DMatrix<f64>,
    llr: &DMatrix<f64>,
    last_lambda: &DMatrix<f64>,
    reference: usize,
) -> Result<InfluenceReport> {
    let u = centrality(&normalize_learned_matrix(a_learned))?;
    let j_prime = estimate_true_state(last_lambda, reference);
    Ok(InfluenceReport::from_parts(
        j_prime,
        &u,
        recover_kl(llr, j_prime, reference),
    ))
}

/// Report from the true combination matrix and likelihood models.
pub fn ground_truth_report(
    a: &CombinationMatrix,
    models: &LikelihoodModel,
    theta_star: usize,
) -> Result<InfluenceReport> {
    let u = centrality(a)?;
    let kl = (0..models.n_agents())
        .map(|k| {
            (0..models.n_hypotheses())
                .map(|t| models.kl_divergence(k, theta_star, t))
                .collect()
        })
        .collect();
    Ok(InfluenceReport::from_parts(theta_star, &u, kl))
}
