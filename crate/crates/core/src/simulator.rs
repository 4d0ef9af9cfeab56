// SPDX-License-Identifier: Apache-2.0

//! Forward simulation of adaptive social learning.
//!
//! Each iteration every agent folds a fresh private observation into its
//! previous private belief with weight `δ` (the adapt step), publishes the
//! result, then fuses its in-neighbours' public beliefs geometrically with the
//! combination weights (the combine step). All belief arithmetic is carried in
//! the log domain and normalized with log-sum-exp.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    perturb_topology, uniform_combination_matrix, CombinationMatrix, DirectedGraph,
};
use crate::likelihood::{LikelihoodModel, Observation};

const TOPOLOGY_STREAM: u64 = 0x7f4a_7c15_9e37_79b9;

/// `ceil(10 ln 2 / δ)`: ten adaptation times.
pub fn default_burn_in(delta: f64) -> usize {
    (10.0 * std::f64::consts::LN_2 / delta).ceil() as usize
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    let (rows, cols) = m.shape();
    for k in 0..rows {
        let mut top = f64::NEG_INFINITY;
        for t in 0..cols {
            top = top.max(m[(k, t)]);
        }
        let mut acc = 0.0;
        for t in 0..cols {
            acc += (m[(k, t)] - top).exp();
        }
        let z = top + acc.ln();
        for t in 0..cols {
            m[(k, t)] -= z;
        }
    }
}

/// Log private (`μ`) and log public (`ψ`) beliefs, N×H each.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub log_private: DMatrix<f64>,
    pub log_public: DMatrix<f64>,
}

impl BeliefState {
    pub fn uniform(n_agents: usize, n_hypotheses: usize) -> Self {
        let v = -(n_hypotheses as f64).ln();
        Self {
            log_private: DMatrix::from_element(n_agents, n_hypotheses, v),
            log_public: DMatrix::from_element(n_agents, n_hypotheses, v),
        }
    }

    pub fn private_belief(&self, k: usize) -> Vec<f64> {
        self.log_private.row(k).iter().map(|x| x.exp()).collect()
    }

    pub fn public_belief(&self, k: usize) -> Vec<f64> {
        self.log_public.row(k).iter().map(|x| x.exp()).collect()
    }
}

/// `log ψ_k(θ) = δ log L_k(ζ_k|θ) + (1−δ) log μ_k(θ) − normalizer`.
pub fn adapt_step(
    log_private: &DMatrix<f64>,
    obs: &[Observation],
    models: &LikelihoodModel,
    delta: f64,
) -> DMatrix<f64> {
    let mut out = log_private.clone();
    adapt_into(&mut out, log_private, obs, models, delta);
    out
}

fn adapt_into(
    out: &mut DMatrix<f64>,
    log_private: &DMatrix<f64>,
    obs: &[Observation],
    models: &LikelihoodModel,
    delta: f64,
) {
    for k in 0..log_private.nrows() {
        let ll = models.log_likelihoods(k, obs[k]);
        for (t, l) in ll.iter().enumerate() {
            out[(k, t)] = delta * l + (1.0 - delta) * log_private[(k, t)];
        }
    }
    normalize_rows(out);
}

/// `log μ_k(θ) = Σ_l a_{lk} log ψ_l(θ) − normalizer`, i.e. `Aᵀ log ψ` row-normalized.
pub fn combine_step(log_public: &DMatrix<f64>, a: &CombinationMatrix) -> DMatrix<f64> {
    let mut out = log_public.clone();
    combine_into(&mut out, log_public, a);
    out
}

fn combine_into(out: &mut DMatrix<f64>, log_public: &DMatrix<f64>, a: &CombinationMatrix) {
    a.weights().tr_mul_to(log_public, out);
    normalize_rows(out);
}

/// Entry `(k, j) = log ψ_k(θ_ref) − log ψ_k(θ_j)`, columns skipping the reference.
pub fn log_belief_matrix(log_public: &DMatrix<f64>, reference: usize) -> DMatrix<f64> {
    let h = log_public.ncols();
    DMatrix::from_fn(log_public.nrows(), h - 1, |k, col| {
        let theta = crate::likelihood::hypothesis_of(col, reference);
        log_public[(k, reference)] - log_public[(k, theta)]
    })
}

/// Inverse of [`log_belief_matrix`] on one row: softmax of `−Λ` with the reference at 0.
pub fn belief_from_log_ratios(row: &[f64], reference: usize) -> Vec<f64> {
    let mut logs = Vec::with_capacity(row.len() + 1);
    for theta in 0..=row.len() {
        logs.push(match crate::likelihood::column_of(theta, reference) {
            None => 0.0,
            Some(c) => -row[c],
        });
    }
    let z = log_sum_exp(&logs);
    logs.into_iter().map(|x| (x - z).exp()).collect()
}

/// Argmax with ties going to the lowest index.
pub fn map_estimate(belief: &[f64]) -> usize {
    let mut best = 0;
    for (t, &b) in belief.iter().enumerate() {
        if b > belief[best] {
            best = t;
        }
    }
    best
}

fn row_argmax(m: &DMatrix<f64>, k: usize) -> usize {
    let mut best = 0;
    for t in 1..m.ncols() {
        if m[(k, t)] > m[(k, best)] {
            best = t;
        }
    }
    best
}

/// Most frequent estimate across agents, ties to the lowest hypothesis index.
pub fn majority_vote(estimates: &[usize], n_hypotheses: usize) -> usize {
    let mut counts = vec![0usize; n_hypotheses];
    for &e in estimates {
        counts[e] += 1;
    }
    let mut best = 0;
    for (t, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = t;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyDrift {
    /// Perturb at recorded iterations `period, 2·period, …`.
    pub period: usize,
    pub flip_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSwitch {
    /// First recorded iteration observing the new state.
    pub at: usize,
    pub theta_star: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSchedule {
    #[serde(default)]
    pub topology: Option<TopologyDrift>,
    #[serde(default)]
    pub truth_switches: Vec<TruthSwitch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub combination: CombinationMatrix,
    pub models: LikelihoodModel,
    pub delta: f64,
    /// Recorded iterations, after burn-in.
    pub n_iters: usize,
    /// Unrecorded warm-up iterations; defaults to [`default_burn_in`].
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub schedule: PerturbationSchedule,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(
        combination: CombinationMatrix,
        models: LikelihoodModel,
        delta: f64,
        n_iters: usize,
        seed: u64,
    ) -> Self {
        Self {
            combination,
            models,
            delta,
            n_iters,
            burn_in: None,
            schedule: PerturbationSchedule::default(),
            seed,
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| default_burn_in(self.delta))
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "δ = {} not in (0, 1)",
                self.delta
            )));
        }
        if self.combination.n_agents() != self.models.n_agents() {
            return Err(Error::DimensionMismatch(format!(
                "combination matrix has {} agents, models have {}",
                self.combination.n_agents(),
                self.models.n_agents()
            )));
        }
        if let Some(t) = self.schedule.topology {
            if t.period == 0 {
                return Err(Error::InvalidParameter(
                    "topology period must be positive".into(),
                ));
            }
        }
        if let Some(s) = self
            .schedule
            .truth_switches
            .iter()
            .find(|s| s.theta_star >= self.models.n_hypotheses())
        {
            return Err(Error::InvalidParameter(format!(
                "switch to unknown hypothesis {}",
                s.theta_star
            )));
        }
        Ok(())
    }
}

/// Everything one recorded iteration produced.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub iteration: usize,
    pub lambda: DMatrix<f64>,
    /// Realized log-likelihood ratios `𝓛_i` of the step.
    pub llr: DMatrix<f64>,
    pub map: Vec<usize>,
    pub theta_star: usize,
    /// The combine step of this iteration used a new combination matrix.
    pub combination_changed: bool,
}

/// Stepwise simulator; [`run_simulation`] drives it to completion.
pub struct Simulator {
    models: LikelihoodModel,
    delta: f64,
    reference: usize,
    theta_star: usize,
    graph: DirectedGraph,
    combination: CombinationMatrix,
    schedule: PerturbationSchedule,
    state: BeliefState,
    obs_rng: ChaCha8Rng,
    topo_rng: ChaCha8Rng,
    next_iteration: usize,
    obs: Vec<Observation>,
}

impl Simulator {
    /// Builds the simulator and runs the burn-in.
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let models = config.models.clone();
        let mut sim = Self {
            delta: config.delta,
            reference: models.reference(),
            theta_star: models.truth(),
            graph: config.combination.support(),
            combination: config.combination.clone(),
            schedule: config.schedule.clone(),
            state: BeliefState::uniform(models.n_agents(), models.n_hypotheses()),
            obs_rng: ChaCha8Rng::seed_from_u64(config.seed),
            topo_rng: ChaCha8Rng::seed_from_u64(config.seed ^ TOPOLOGY_STREAM),
            next_iteration: 0,
            obs: vec![0; models.n_agents()],
            models,
        };
        for _ in 0..config.burn_in() {
            sim.advance();
        }
        Ok(sim)
    }

    pub fn state(&self) -> &BeliefState {
        &self.state
    }

    pub fn combination(&self) -> &CombinationMatrix {
        &self.combination
    }

    pub fn theta_star(&self) -> usize {
        self.theta_star
    }

    pub fn models(&self) -> &LikelihoodModel {
        &self.models
    }

    /// Unrecorded iteration under the initial truth and topology.
    fn advance(&mut self) {
        for k in 0..self.models.n_agents() {
            self.obs[k] = self
                .models
                .sample_observation(k, self.theta_star, &mut self.obs_rng);
        }
        adapt_into(
            &mut self.state.log_public,
            &self.state.log_private,
            &self.obs,
            &self.models,
            self.delta,
        );
        combine_into(
            &mut self.state.log_private,
            &self.state.log_public,
            &self.combination,
        );
    }

    fn apply_schedule(&mut self, i: usize) -> Result<bool> {
        if let Some(s) = self
            .schedule
            .truth_switches
            .iter()
            .rev()
            .find(|s| s.at == i)
        {
            self.theta_star = s.theta_star;
        }
        if let Some(t) = self.schedule.topology {
            if i > 0 && i.is_multiple_of(t.period) {
                self.graph = perturb_topology(&self.graph, t.flip_prob, self.topo_rng.next_u64())?;
                self.combination = uniform_combination_matrix(&self.graph);
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Runs one recorded iteration.
    pub fn step(&mut self) -> Result<StepOutput> {
        let i = self.next_iteration;
        let changed = self.apply_schedule(i)?;
        for k in 0..self.models.n_agents() {
            self.obs[k] = self
                .models
                .sample_observation(k, self.theta_star, &mut self.obs_rng);
        }
        adapt_into(
            &mut self.state.log_public,
            &self.state.log_private,
            &self.obs,
            &self.models,
            self.delta,
        );
        let lambda = log_belief_matrix(&self.state.log_public, self.reference);
        let llr = self.realized_llr();
        let map = (0..self.models.n_agents())
            .map(|k| row_argmax(&self.state.log_public, k))
            .collect();
        combine_into(
            &mut self.state.log_private,
            &self.state.log_public,
            &self.combination,
        );
        self.next_iteration += 1;
        Ok(StepOutput {
            iteration: i,
            lambda,
            llr,
            map,
            theta_star: self.theta_star,
            combination_changed: changed || i == 0,
        })
    }

    fn realized_llr(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.models.n_agents(), self.models.n_hypotheses() - 1);
        for k in 0..self.models.n_agents() {
            let ll = self.models.log_likelihoods(k, self.obs[k]);
            for (c, v) in m.row_mut(k).iter_mut().enumerate() {
                *v = ll[self.reference] - ll[crate::likelihood::hypothesis_of(c, self.reference)];
            }
        }
        m
    }
}

/// One recorded iteration: the N×(H−1) log-belief matrix `Λ_i` and per-agent MAP estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub lambda: DMatrix<f64>,
    pub map: Vec<usize>,
    pub theta_star: usize,
}

/// Recorded public-belief stream plus the ground truth that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub steps: Vec<TraceStep>,
    /// `(first iteration, matrix)` segments, sorted by iteration.
    pub combinations: Vec<(usize, CombinationMatrix)>,
    pub delta: f64,
    pub seed: u64,
    pub reference: usize,
    pub n_hypotheses: usize,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Combination matrix used by the combine step of iteration `i`.
    pub fn combination_at(&self, i: usize) -> &CombinationMatrix {
        let idx = self.combinations.partition_point(|(start, _)| *start <= i);
        &self.combinations[idx.saturating_sub(1)].1
    }

    pub fn theta_star_at(&self, i: usize) -> usize {
        self.steps[i].theta_star
    }

    pub fn lambdas(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.steps.iter().map(|s| &s.lambda)
    }

    /// Majority MAP estimate per iteration.
    pub fn majority_estimates(&self) -> Vec<usize> {
        self.steps
            .iter()
            .map(|s| majority_vote(&s.map, self.n_hypotheses))
            .collect()
    }
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationTrace> {
    let mut sim = Simulator::new(config)?;
    let mut steps = Vec::with_capacity(config.n_iters);
    let mut combinations = Vec::new();
    for _ in 0..config.n_iters {
        let out = sim.step()?;
        if out.combination_changed {
            combinations.push((out.iteration, sim.combination().clone()));
        }
        steps.push(TraceStep {
            lambda: out.lambda,
            map: out.map,
            theta_star: out.theta_star,
        });
    }
    if combinations.is_empty() {
        combinations.push((0, sim.combination().clone()));
    }
    Ok(SimulationTrace {
        steps,
        combinations,
        delta: config.delta,
        seed: config.seed,
        reference: config.models.reference(),
        n_hypotheses: config.models.n_hypotheses(),
    })
}

/// `r_i = (1/(i+1)) Σ_{t≤i} 1{majority estimate at t = θ★(t)}`.
pub fn classification_rate(trace: &SimulationTrace) -> Vec<f64> {
    classification_rate_since(trace, 0)
}

/// Cumulative rate restarted at iteration `start`; entry `t` covers `start..=start+t`.
pub fn classification_rate_since(trace: &SimulationTrace, start: usize) -> Vec<f64> {
    let estimates = trace.majority_estimates();
    let mut hits = 0usize;
    estimates
        .iter()
        .zip(&trace.steps)
        .skip(start)
        .enumerate()
        .map(|(t, (&e, s))| {
            hits += usize::from(e == s.theta_star);
            hits as f64 / (t + 1) as f64
        })
        .collect()
}
