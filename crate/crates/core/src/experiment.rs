// SPDX-License-Identifier: Apache-2.0

//! Config-driven end-to-end runs: generate a graph and models, simulate,
//! learn online, score against ground truth, and evaluate embedded checks.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate_erdos_renyi, uniform_combination_matrix, CombinationMatrix};
use crate::influence::{analyze, ground_truth_report, InfluenceReport};
use crate::learner::{reconstruction_error, DeltaMoments, GslConfig, Learner};
use crate::likelihood::{
    generate_models, planted_sigma2, HypothesisSet, LikelihoodModel, SIGMA2_INFLUENTIAL,
    SIGMA2_WEAK,
};
use crate::simulator::{
    default_burn_in, majority_vote, PerturbationSchedule, SimulationConfig, Simulator,
};

/// Per-agent σ² assignment: `high` on the listed agents, `low` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub influential: Vec<usize>,
    pub sigma2_influential: f64,
    pub sigma2_other: f64,
}

impl ModelSpec {
    /// Three strongly informative agents `{0, 1, 2}` among weak ones.
    pub fn planted_three() -> Self {
        Self {
            influential: vec![0, 1, 2],
            sigma2_influential: SIGMA2_INFLUENTIAL,
            sigma2_other: SIGMA2_WEAK,
        }
    }

    pub fn all_weak() -> Self {
        Self {
            influential: Vec::new(),
            sigma2_influential: SIGMA2_WEAK,
            sigma2_other: SIGMA2_WEAK,
        }
    }

    pub fn sigma2(&self, n: usize) -> Vec<f64> {
        planted_sigma2(
            n,
            &self.influential,
            self.sigma2_influential,
            self.sigma2_other,
        )
    }
}

/// One configuration evaluated on every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    /// Learner to run alongside the simulation; rate-only arms leave it out.
    #[serde(default)]
    pub learner: Option<GslConfig>,
    /// Overrides the scenario models.
    #[serde(default)]
    pub models: Option<ModelSpec>,
}

impl Arm {
    pub fn learner(label: &str, mu: f64, delta: f64, window: usize) -> Self {
        Self {
            label: label.into(),
            learner: Some(GslConfig::new(mu, delta, window)),
            models: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AError,
    LlrError,
}

/// Assertion evaluated on the results of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// Seed-median steady metric strictly increasing along `arms`.
    StrictOrder { metric: Metric, arms: Vec<String> },
    /// Seed-median steady `numerator / denominator` within `[min, max]`.
    Ratio {
        metric: Metric,
        numerator: String,
        denominator: String,
        min: f64,
        max: f64,
    },
    /// Learned top-k equals the true top-k on at least `min_seeds` seeds.
    TopK { arm: String, min_seeds: usize },
    /// Seed-median terminal classification rate above `min`.
    TerminalRate { arm: String, min: f64 },
    /// Seed-median terminal rate of `lower` strictly below that of `higher`.
    RateOrder { lower: String, higher: String },
    /// After every topology change, the steady error before the next change
    /// is at most `factor` times the steady error before this one.
    TopologyRecovery { arm: String, factor: f64 },
    /// After every truth switch, the rate restarted at the switch exceeds
    /// `threshold` within `within` iterations (seed median).
    TruthRecovery {
        arm: String,
        threshold: f64,
        within: usize,
    },
}

fn default_rolling() -> usize {
    50
}

fn default_edge_prob() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n_agents: usize,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    pub n_hypotheses: usize,
    #[serde(default)]
    pub theta_star: usize,
    pub delta: f64,
    /// Total iterations including the simulator burn-in.
    pub n_iterations: usize,
    /// Defaults to `ceil(10 ln 2 / δ)`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub seeds: Vec<u64>,
    pub models: ModelSpec,
    #[serde(default)]
    pub schedule: PerturbationSchedule,
    pub arms: Vec<Arm>,
    #[serde(default = "default_rolling")]
    pub rolling_window: usize,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl ScenarioConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in
            .unwrap_or_else(|| default_burn_in(self.delta))
            .min(self.n_iterations)
    }

    pub fn recorded_iterations(&self) -> usize {
        self.n_iterations - self.burn_in()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "scenario needs at least one seed".into(),
            ));
        }
        if self.arms.is_empty() {
            return Err(Error::InvalidParameter(
                "scenario needs at least one arm".into(),
            ));
        }
        if self.rolling_window == 0 {
            return Err(Error::InvalidParameter(
                "rolling window must be at least 1".into(),
            ));
        }
        let mut labels: Vec<&str> = self.arms.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("arm labels must be unique".into()));
        }
        for arm in &self.arms {
            if let Some(l) = &arm.learner {
                l.validate()?;
                if l.delta != self.delta {
                    return Err(Error::InvalidParameter(format!(
                        "arm {} learner δ = {} differs from scenario δ = {}",
                        arm.label, l.delta, self.delta
                    )));
                }
            }
        }
        HypothesisSet::new(self.n_hypotheses, 0, self.theta_star)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Seeds of the graph, model and observation generators derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub graph: u64,
    pub models: u64,
    pub simulation: u64,
}

impl RunSeeds {
    pub fn derive(seed: u64) -> Self {
        let base = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Self {
            graph: base,
            models: base.wrapping_add(1),
            simulation: base.wrapping_add(2),
        }
    }
}

/// Ground-truth instance for one seed.
#[derive(Debug, Clone)]
pub struct Instance {
    pub combination: CombinationMatrix,
    pub models: LikelihoodModel,
}

pub fn build_instance(
    n_agents: usize,
    edge_prob: f64,
    n_hypotheses: usize,
    theta_star: usize,
    spec: &ModelSpec,
    seed: u64,
) -> Result<Instance> {
    let seeds = RunSeeds::derive(seed);
    let g = generate_erdos_renyi(n_agents, edge_prob, seeds.graph)?;
    let h = HypothesisSet::new(n_hypotheses, 0, theta_star)?;
    let models = generate_models(h, &spec.sigma2(n_agents), seeds.models)?;
    Ok(Instance {
        combination: uniform_combination_matrix(&g),
        models,
    })
}

/// Per-iteration metrics of one `(arm, seed)` run. Error series are empty
/// for arms without a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub run_id: String,
    pub seed: u64,
    pub a_error: Vec<f64>,
    pub llr_error: Vec<f64>,
    /// Cumulative classification rate.
    pub r: Vec<f64>,
    /// Majority estimate matched the truth at each iteration.
    pub correct: Vec<bool>,
    /// `‖A₀ − A★‖²_F` before any update.
    pub initial_a_error: Option<f64>,
    pub initial_llr_error: Option<f64>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn metric(&self, m: Metric) -> &[f64] {
        match m {
            Metric::AError => &self.a_error,
            Metric::LlrError => &self.llr_error,
        }
    }

    /// Steady level of a metric; the initial error when nothing was recorded.
    pub fn steady(&self, m: Metric, rolling: usize) -> Option<f64> {
        let s = self.metric(m);
        if s.is_empty() {
            return match m {
                Metric::AError => self.initial_a_error,
                Metric::LlrError => self.initial_llr_error,
            };
        }
        let s = match m {
            Metric::AError => s.to_vec(),
            Metric::LlrError => rolling_mean(s, rolling),
        };
        Some(steady_state(&s))
    }
}

/// Outcome of one `(arm, seed)` run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub arm: String,
    pub seed: u64,
    pub series: MetricSeries,
    pub truth: Instance,
    /// Final combination matrix of the simulation.
    pub final_combination: CombinationMatrix,
    pub learned_a: Option<DMatrix<f64>>,
    pub learned_llr: Option<DMatrix<f64>>,
    pub report: Option<InfluenceReport>,
    pub true_report: InfluenceReport,
    /// Share of the planted influential agents found in the learned top-k.
    pub topk_score: Option<f64>,
}

fn squared_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Trailing mean over `min(window, i + 1)` values.
pub fn rolling_mean(series: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (i, &x) in series.iter().enumerate() {
        acc += x;
        if i >= w {
            acc -= series[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median over the final 10% of a series (at least one value).
pub fn steady_state(series: &[f64]) -> f64 {
    let n = series.len();
    let k = (n / 10).max(1).min(n);
    median(&series[n - k..])
}

/// `|top_k(learned) ∩ top_k(true)| / k`.
pub fn compare_influence(learned: &InfluenceReport, truth: &InfluenceReport, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let a = learned.top(k);
    let b = truth.top(k);
    a.iter().filter(|x| b.contains(x)).count() as f64 / k as f64
}

/// `|top ∩ set| / |set|`.
pub fn set_overlap(top: &[usize], set: &[usize]) -> f64 {
    if set.is_empty() {
        return 1.0;
    }
    top.iter().filter(|x| set.contains(x)).count() as f64 / set.len() as f64
}

/// Runs one arm on one seed.
pub fn run_arm(cfg: &ScenarioConfig, arm: &Arm, seed: u64) -> Result<RunResult> {
    let spec = arm.models.as_ref().unwrap_or(&cfg.models);
    let truth = build_instance(
        cfg.n_agents,
        cfg.edge_prob,
        cfg.n_hypotheses,
        cfg.theta_star,
        spec,
        seed,
    )?;
    let mut sim_cfg = SimulationConfig::new(
        truth.combination.clone(),
        truth.models.clone(),
        cfg.delta,
        cfg.recorded_iterations(),
        RunSeeds::derive(seed).simulation,
    );
    sim_cfg.burn_in = Some(cfg.burn_in());
    sim_cfg.schedule = cfg.schedule.clone();
    let mut sim = Simulator::new(&sim_cfg)?;

    let n = cfg.n_agents;
    let cols = cfg.n_hypotheses - 1;
    let lbar_cache = |theta: usize, cache: &mut BTreeMap<usize, DMatrix<f64>>| -> DMatrix<f64> {
        cache
            .entry(theta)
            .or_insert_with(|| truth.models.expected_llr_matrix(theta))
            .clone()
    };
    let mut lbars = BTreeMap::new();
    let mut learner = match &arm.learner {
        Some(g) => {
            let mut l = Learner::new(*g, n, cols)?;
            l.set_known_llr(lbar_cache(cfg.theta_star, &mut lbars));
            Some(l)
        }
        None => None,
    };
    let initial_a = learner
        .as_ref()
        .map(|l| reconstruction_error(l.a(), truth.combination.weights()))
        .transpose()?;
    let initial_llr = learner
        .as_ref()
        .map(|l| reconstruction_error(l.llr(), &lbar_cache(cfg.theta_star, &mut lbars)))
        .transpose()?;

    let steps = cfg.recorded_iterations();
    let mut series = MetricSeries {
        run_id: arm.label.clone(),
        seed,
        a_error: Vec::new(),
        llr_error: Vec::new(),
        r: Vec::with_capacity(steps),
        correct: Vec::with_capacity(steps),
        initial_a_error: initial_a,
        initial_llr_error: initial_llr,
    };
    let mut hits = 0usize;
    let mut lbar_theta = cfg.theta_star;
    let mut lbar = lbar_cache(lbar_theta, &mut lbars);
    let mut last_lambda = DMatrix::zeros(n, cols);
    for t in 0..steps {
        let out = sim.step()?;
        let ok = majority_vote(&out.map, cfg.n_hypotheses) == out.theta_star;
        hits += usize::from(ok);
        series.correct.push(ok);
        series.r.push(hits as f64 / (t + 1) as f64);
        let switched = out.theta_star != lbar_theta;
        if switched {
            lbar_theta = out.theta_star;
            lbar = lbar_cache(lbar_theta, &mut lbars);
        }
        if let Some(l) = learner.as_mut() {
            if switched && l.config().known_llr {
                l.set_known_llr(lbar.clone());
            }
            l.observe(&out.lambda)?;
            series
                .a_error
                .push(squared_distance(l.a(), sim.combination().weights()));
            series.llr_error.push(squared_distance(l.llr(), &lbar));
        }
        last_lambda = out.lambda;
    }

    let final_theta = sim.theta_star();
    let true_report = ground_truth_report(sim.combination(), &truth.models, final_theta)?;
    let (learned_a, learned_llr, report, topk_score) = match &learner {
        Some(l) if steps > 0 => {
            let rep = analyze(l.a(), l.llr(), &last_lambda, truth.models.reference())?;
            let k = spec.influential.len();
            let score = (k > 0).then(|| set_overlap(rep.top(k), &spec.influential));
            (Some(l.a().clone()), Some(l.llr().clone()), Some(rep), score)
        }
        Some(l) => (Some(l.a().clone()), Some(l.llr().clone()), None, None),
        None => (None, None, None, None),
    };
    Ok(RunResult {
        arm: arm.label.clone(),
        seed,
        series,
        final_combination: sim.combination().clone(),
        truth,
        learned_a,
        learned_llr,
        report,
        true_report,
        topk_score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub steady_a_error: Option<f64>,
    pub steady_llr_error: Option<f64>,
    pub terminal_rate: Option<f64>,
    pub topk_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub arms: Vec<ArmSummary>,
    pub checks: Vec<CheckOutcome>,
}

impl ScenarioSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub struct ScenarioResult {
    pub config: ScenarioConfig,
    /// Ordered by arm, then seed.
    pub runs: Vec<RunResult>,
    pub summary: ScenarioSummary,
}

impl ScenarioResult {
    pub fn runs_of<'a>(&'a self, arm: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs.iter().filter(move |r| r.arm == arm)
    }

    pub fn arm_summary(&self, arm: &str) -> Option<&ArmSummary> {
        self.summary.arms.iter().find(|a| a.label == arm)
    }

    /// CSV `run_id,seed,i,a_error,llr_error,r_i`; error fields are empty for rate-only arms.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run_id", "seed", "i", "a_error", "llr_error", "r_i"])?;
        for run in &self.runs {
            let s = &run.series;
            for i in 0..s.len() {
                let a = s.a_error.get(i).map(f64::to_string).unwrap_or_default();
                let l = s.llr_error.get(i).map(f64::to_string).unwrap_or_default();
                w.write_record([
                    s.run_id.clone(),
                    s.seed.to_string(),
                    i.to_string(),
                    a,
                    l,
                    s.r[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<name>.csv` and `<name>_summary.json` under `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.config.name));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(csv_path)?))?;
        let json_path = dir.join(format!("{}_summary.json", self.config.name));
        std::fs::write(json_path, serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let jobs: Vec<(&Arm, u64)> = cfg
        .arms
        .iter()
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(arm, seed)| run_arm(cfg, arm, *seed))
        .collect::<Result<Vec<_>>>()?;
    let arms = cfg
        .arms
        .iter()
        .map(|arm| summarize_arm(cfg, &arm.label, runs.iter().filter(|r| r.arm == arm.label)))
        .collect();
    let mut summary = ScenarioSummary {
        name: cfg.name.clone(),
        arms,
        checks: Vec::new(),
    };
    let result_runs = runs;
    summary.checks = cfg
        .checks
        .iter()
        .map(|c| evaluate_check(cfg, c, &result_runs, &summary))
        .collect();
    Ok(ScenarioResult {
        config: cfg.clone(),
        runs: result_runs,
        summary,
    })
}

fn summarize_arm<'a>(
    cfg: &ScenarioConfig,
    label: &str,
    runs: impl Iterator<Item = &'a RunResult>,
) -> ArmSummary {
    let runs: Vec<&RunResult> = runs.collect();
    let med = |f: &dyn Fn(&RunResult) -> Option<f64>| {
        let v: Vec<f64> = runs.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| median(&v))
    };
    ArmSummary {
        label: label.into(),
        steady_a_error: med(&|r| r.series.steady(Metric::AError, cfg.rolling_window)),
        steady_llr_error: med(&|r| r.series.steady(Metric::LlrError, cfg.rolling_window)),
        terminal_rate: med(&|r| r.series.r.last().copied()),
        topk_scores: runs.iter().filter_map(|r| r.topk_score).collect(),
    }
}

fn steady_of(summary: &ScenarioSummary, arm: &str, m: Metric) -> Option<f64> {
    let a = summary.arms.iter().find(|a| a.label == arm)?;
    match m {
        Metric::AError => a.steady_a_error,
        Metric::LlrError => a.steady_llr_error,
    }
}

fn rate_of(summary: &ScenarioSummary, arm: &str) -> Option<f64> {
    summary.arms.iter().find(|a| a.label == arm)?.terminal_rate
}

/// Per change point `t_p`: steady error before the next change over steady error before `t_p`.
pub fn topology_recovery_ratios(a_error: &[f64], period: usize) -> Vec<f64> {
    let n = a_error.len();
    let w = (period / 10).max(1);
    let mut out = Vec::new();
    let mut t = period;
    while t < n {
        let next = (t + period).min(n);
        if next - t < w || t < w {
            break;
        }
        let pre = median(&a_error[t - w..t]);
        let post = median(&a_error[next - w..next]);
        out.push(post / pre);
        t += period;
    }
    out
}

/// Iterations after `start` until the rate restarted at `start` exceeds
/// `threshold`, looking no further than `end`.
pub fn recovery_time(correct: &[bool], start: usize, end: usize, threshold: f64) -> Option<usize> {
    let mut hits = 0usize;
    for (t, &ok) in correct[start..end.min(correct.len())].iter().enumerate() {
        hits += usize::from(ok);
        if hits as f64 / (t + 1) as f64 > threshold {
            return Some(t + 1);
        }
    }
    None
}

fn evaluate_check(
    cfg: &ScenarioConfig,
    check: &Check,
    runs: &[RunResult],
    summary: &ScenarioSummary,
) -> CheckOutcome {
    let (passed, detail) = match check {
        Check::StrictOrder { metric, arms } => {
            let vals: Vec<Option<f64>> = arms
                .iter()
                .map(|a| steady_of(summary, a, *metric))
                .collect();
            let ok = vals.iter().all(Option::is_some)
                && vals.windows(2).all(|w| w[0].unwrap() < w[1].unwrap());
            let d = arms
                .iter()
                .zip(&vals)
                .map(|(a, v)| format!("{a}={}", v.map_or("n/a".into(), |x| format!("{x:.4e}"))))
                .collect::<Vec<_>>()
                .join(" < ");
            (ok, d)
        }
        Check::Ratio {
            metric,
            numerator,
            denominator,
            min,
            max,
        } => match (
            steady_of(summary, numerator, *metric),
            steady_of(summary, denominator, *metric),
        ) {
            (Some(a), Some(b)) => {
                let r = a / b;
                (
                    r >= *min && r <= *max,
                    format!("{numerator}/{denominator} = {r:.3} (want [{min}, {max}])"),
                )
            }
            _ => (false, "missing arm".into()),
        },
        Check::TopK { arm, min_seeds } => {
            let scores: Vec<f64> = runs
                .iter()
                .filter(|r| &r.arm == arm)
                .filter_map(|r| r.topk_score)
                .collect();
            let hits = scores.iter().filter(|&&s| s == 1.0).count();
            (
                hits >= *min_seeds,
                format!(
                    "learned top-k equals the planted set on {hits}/{} seeds (want ≥ {min_seeds})",
                    scores.len()
                ),
            )
        }
        Check::TerminalRate { arm, min } => match rate_of(summary, arm) {
            Some(r) => (
                r > *min,
                format!("{arm} terminal r = {r:.4} (want > {min})"),
            ),
            None => (false, "missing arm".into()),
        },
        Check::RateOrder { lower, higher } => {
            match (rate_of(summary, lower), rate_of(summary, higher)) {
                (Some(a), Some(b)) => (a < b, format!("{lower} r = {a:.4} < {higher} r = {b:.4}")),
                _ => (false, "missing arm".into()),
            }
        }
        Check::TopologyRecovery { arm, factor } => match cfg.schedule.topology {
            Some(t) => {
                let per_seed: Vec<Vec<f64>> = runs
                    .iter()
                    .filter(|r| &r.arm == arm)
                    .map(|r| topology_recovery_ratios(&r.series.a_error, t.period))
                    .collect();
                let count = per_seed.iter().map(Vec::len).min().unwrap_or(0);
                let medians: Vec<f64> = (0..count)
                    .map(|p| median(&per_seed.iter().map(|s| s[p]).collect::<Vec<_>>()))
                    .collect();
                let ok = count > 0 && medians.iter().all(|&m| m <= *factor);
                (
                    ok,
                    format!("post/pre ratios {medians:.3?} (want ≤ {factor})"),
                )
            }
            None => (false, "scenario has no topology schedule".into()),
        },
        Check::TruthRecovery {
            arm,
            threshold,
            within,
        } => {
            let switches = &cfg.schedule.truth_switches;
            let n = cfg.recorded_iterations();
            let mut medians = Vec::new();
            for (idx, s) in switches.iter().enumerate() {
                let end = switches.get(idx + 1).map_or(n, |x| x.at);
                let times: Vec<f64> = runs
                    .iter()
                    .filter(|r| &r.arm == arm)
                    .map(|r| {
                        recovery_time(&r.series.correct, s.at, end, *threshold)
                            .map_or(f64::INFINITY, |t| t as f64)
                    })
                    .collect();
                medians.push(median(&times));
            }
            let ok = !medians.is_empty() && medians.iter().all(|&m| m <= *within as f64);
            (ok, format!("recovery times {medians:?} (want ≤ {within})"))
        }
    };
    CheckOutcome {
        check: check.clone(),
        passed,
        detail,
    }
}

/// `‖A_min − A★‖_F` of the closed-form minimizer built from `n_samples`
/// steady `Δ` pairs of window `m`.
pub fn closed_form_distance(
    instance: &Instance,
    delta: f64,
    m: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = instance.models.n_agents();
    let cols = instance.models.n_hypotheses() - 1;
    let cfg = SimulationConfig::new(
        instance.combination.clone(),
        instance.models.clone(),
        delta,
        0,
        seed,
    );
    let mut sim = Simulator::new(&cfg)?;
    let mut moments = DeltaMoments::new(m, n, cols);
    while moments.count() < n_samples {
        moments.push(&sim.step()?.lambda);
    }
    let a = moments.minimizer(delta)?;
    Ok((a - instance.combination.weights()).norm())
}

pub const BUILTIN_SCENARIOS: [&str; 6] = [
    "fig3_msd",
    "fig4_llr",
    "fig5_influence",
    "fig6_rate",
    "fig7a_topology",
    "fig7b_truth",
];

const DEFAULT_DELTA: f64 = 0.05;

fn base(name: &str, post_burn_in: usize) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        n_agents: 20,
        edge_prob: 0.2,
        n_hypotheses: 5,
        theta_star: 0,
        delta: DEFAULT_DELTA,
        n_iterations: post_burn_in + default_burn_in(DEFAULT_DELTA),
        burn_in: None,
        seeds: (1..=5).collect(),
        models: ModelSpec::planted_three(),
        schedule: PerturbationSchedule::default(),
        arms: Vec::new(),
        rolling_window: 50,
        checks: Vec::new(),
    }
}

fn paired_arms() -> Vec<Arm> {
    vec![
        Arm::learner("M50", 0.1, DEFAULT_DELTA, 50),
        Arm::learner("M10", 0.01, DEFAULT_DELTA, 10),
        Arm::learner("M1", 0.001, DEFAULT_DELTA, 1),
    ]
}

/// Built-in scenario by name.
pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    let s = match name {
        "fig3_msd" => {
            let mut s = base(name, 5000);
            let mut known = Arm::learner("known", 0.1, DEFAULT_DELTA, 50);
            if let Some(l) = known.learner.as_mut() {
                l.known_llr = true;
            }
            s.arms.push(known);
            s.arms.extend(paired_arms());
            s.arms
                .push(Arm::learner("M50_half_mu", 0.05, DEFAULT_DELTA, 50));
            s.checks = vec![
                Check::StrictOrder {
                    metric: Metric::AError,
                    arms: ["known", "M50", "M10", "M1"].map(String::from).to_vec(),
                },
                Check::Ratio {
                    metric: Metric::AError,
                    numerator: "M50".into(),
                    denominator: "M50_half_mu".into(),
                    min: 1.4,
                    max: 3.0,
                },
            ];
            s
        }
        "fig4_llr" => {
            let mut s = base(name, 5000);
            s.arms = paired_arms();
            s.checks = vec![Check::StrictOrder {
                metric: Metric::LlrError,
                arms: ["M50", "M10", "M1"].map(String::from).to_vec(),
            }];
            s
        }
        "fig5_influence" => {
            let mut s = base(name, 5000);
            s.arms = vec![Arm::learner("M50", 0.1, DEFAULT_DELTA, 50)];
            s.checks = vec![Check::TopK {
                arm: "M50".into(),
                min_seeds: 4,
            }];
            s
        }
        "fig6_rate" => {
            let mut s = base(name, 5000);
            s.arms = vec![
                Arm {
                    label: "influential".into(),
                    learner: None,
                    models: Some(ModelSpec::planted_three()),
                },
                Arm {
                    label: "weak".into(),
                    learner: None,
                    models: Some(ModelSpec::all_weak()),
                },
            ];
            s.checks = vec![
                Check::TerminalRate {
                    arm: "influential".into(),
                    min: 0.9,
                },
                Check::RateOrder {
                    lower: "weak".into(),
                    higher: "influential".into(),
                },
            ];
            s
        }
        "fig7a_topology" => {
            let mut s = base(name, 5000);
            s.schedule.topology = Some(crate::simulator::TopologyDrift {
                period: 1000,
                flip_prob: 0.005,
            });
            s.arms = vec![Arm::learner("M50", 0.1, DEFAULT_DELTA, 50)];
            s.checks = vec![Check::TopologyRecovery {
                arm: "M50".into(),
                factor: 2.0,
            }];
            s
        }
        "fig7b_truth" => {
            let mut s = base(name, 3000);
            s.schedule.truth_switches = vec![
                crate::simulator::TruthSwitch {
                    at: 1000,
                    theta_star: 2,
                },
                crate::simulator::TruthSwitch {
                    at: 2000,
                    theta_star: 4,
                },
            ];
            s.arms = vec![Arm::learner("M50", 0.1, DEFAULT_DELTA, 50)];
            s.checks = vec![Check::TruthRecovery {
                arm: "M50".into(),
                threshold: 0.9,
                within: 3 * default_burn_in(DEFAULT_DELTA),
            }];
            s
        }
        other => return Err(Error::UnknownScenario(other.into())),
    };
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rolling_mean_cases() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(rolling_mean(&s, 1), s);
        assert_eq!(rolling_mean(&[2.5; 7], 3), vec![2.5; 7]);
        let r = rolling_mean(&s, 3);
        assert!((r[9] - 9.0).abs() < 1e-12);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn steady_and_median() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let s: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(steady_state(&s), 94.5);
        assert_eq!(steady_state(&[7.0]), 7.0);
    }

    fn report(values: &[f64]) -> InfluenceReport {
        let u = crate::graph::PerronVector::from_entries(vec![1.0; values.len()]).unwrap();
        InfluenceReport::from_parts(0, &u, values.iter().map(|&v| vec![0.0, v]).collect())
    }

    #[test]
    fn compare_influence_cases() {
        let a = report(&[0.9, 0.8, 0.7, 0.1, 0.05]);
        assert_eq!(compare_influence(&a, &a, 3), 1.0);
        let b = report(&[0.1, 0.05, 0.2, 0.9, 0.8]);
        assert_eq!(compare_influence(&a, &b, 2), 0.0);
        assert!((compare_influence(&a, &b, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn recovery_helpers() {
        let correct = [
            true, true, false, false, true, true, true, true, true, true, true, true, true,
        ];
        // restarted at 2: F F T T … cumulative 0,0,1/3,2/4,…,9/11
        assert_eq!(recovery_time(&correct, 2, correct.len(), 0.5), Some(5));
        assert_eq!(recovery_time(&correct, 2, correct.len(), 0.9), None);
        let mut e = vec![1.0; 30];
        e[10..20].fill(3.0);
        e[20..].fill(1.0);
        let r = topology_recovery_ratios(&e, 10);
        assert_eq!(r, vec![3.0, 1.0 / 3.0]);
    }

    #[test]
    fn builtin_names_validate() {
        for n in BUILTIN_SCENARIOS {
            let s = builtin_scenario(n).unwrap();
            assert_eq!(s.name, n);
            let back = ScenarioConfig::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
            assert_eq!(back, s);
        }
        assert!(matches!(
            builtin_scenario("fig9"),
            Err(Error::UnknownScenario(_))
        ));
    }

    fn tiny(n_iterations: usize) -> ScenarioConfig {
        let mut s = base("tiny", 0);
        s.n_agents = 6;
        s.edge_prob = 0.5;
        s.n_hypotheses = 3;
        s.n_iterations = n_iterations;
        s.seeds = vec![3, 4];
        s.arms = vec![Arm::learner("M5", 0.1, DEFAULT_DELTA, 5)];
        s
    }

    #[test]
    fn zero_iterations_give_initial_error() {
        let res = run_scenario(&tiny(0)).unwrap();
        for r in &res.runs {
            assert!(r.series.is_empty());
            let init = reconstruction_error(
                &DMatrix::from_element(6, 6, 1.0 / 6.0),
                r.truth.combination.weights(),
            )
            .unwrap();
            assert_eq!(r.series.steady(Metric::AError, 50), Some(init));
        }
    }

    #[test]
    fn deterministic_csv() {
        let cfg = tiny(400);
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_scenario(&cfg).unwrap().write_csv(&mut a).unwrap();
        run_scenario(&cfg).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("run_id,seed,i,a_error,llr_error,r_i\n"));
        assert_eq!(text.lines().count(), 1 + 2 * cfg.recorded_iterations());
    }

    #[test]
    fn series_length_excludes_burn_in() {
        let cfg = tiny(300);
        let res = run_scenario(&cfg).unwrap();
        for r in &res.runs {
            assert_eq!(r.series.len(), 300 - default_burn_in(DEFAULT_DELTA));
            assert_eq!(r.series.a_error.len(), r.series.len());
        }
    }
}
