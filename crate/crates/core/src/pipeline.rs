// SPDX-License-Identifier: Apache-2.0

//! File-to-file workflows behind the command-line tool.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{build_instance, ModelSpec, RunSeeds};
use crate::influence::{analyze, InfluenceReport};
use crate::io::{
    matrix_rows, CombinationSegment, LearnedJson, TraceRecord, TraceWriter, TruthFile, TruthSegment,
};
use crate::learner::{reconstruction_error, GslConfig, Learner};
use crate::simulator::{PerturbationSchedule, SimulationConfig, Simulator};

/// Random instance description: Erdős–Rényi graph with uniform weights and
/// Bernoulli models drawn from `models`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSimulation {
    pub n_agents: usize,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    pub n_hypotheses: usize,
    #[serde(default)]
    pub theta_star: usize,
    pub delta: f64,
    pub n_iters: usize,
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub seed: u64,
    #[serde(default = "ModelSpec::planted_three")]
    pub models: ModelSpec,
    #[serde(default)]
    pub schedule: PerturbationSchedule,
}

fn default_edge_prob() -> f64 {
    0.2
}

/// Either a fully explicit configuration or a generator recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimulationSpec {
    Explicit(SimulationConfig),
    Generated(GeneratedSimulation),
}

impl SimulationSpec {
    pub fn into_config(self) -> Result<SimulationConfig> {
        match self {
            Self::Explicit(c) => Ok(c),
            Self::Generated(g) => {
                let inst = build_instance(
                    g.n_agents,
                    g.edge_prob,
                    g.n_hypotheses,
                    g.theta_star,
                    &g.models,
                    g.seed,
                )?;
                let mut c = SimulationConfig::new(
                    inst.combination,
                    inst.models,
                    g.delta,
                    g.n_iters,
                    RunSeeds::derive(g.seed).simulation,
                );
                c.burn_in = g.burn_in;
                c.schedule = g.schedule;
                Ok(c)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Simulates `config`, streaming records to `out`. Returns the ground truth.
pub fn simulate_to_file(config: &SimulationConfig, out: &Path) -> Result<TruthFile> {
    let mut sim = Simulator::new(config)?;
    let mut writer = TraceWriter::create(out)?;
    let mut combinations = Vec::new();
    let mut truth: Vec<TruthSegment> = Vec::new();
    for _ in 0..config.n_iters {
        let s = sim.step()?;
        if s.combination_changed {
            combinations.push(CombinationSegment {
                start: s.iteration,
                a: sim.combination().clone(),
            });
        }
        if truth.last().is_none_or(|t| t.theta_star != s.theta_star) {
            truth.push(TruthSegment {
                start: s.iteration,
                theta_star: s.theta_star,
            });
        }
        writer.write(&TraceRecord {
            i: s.iteration,
            lambda: matrix_rows(&s.lambda),
            map: Some(s.map),
            theta_star: Some(s.theta_star),
        })?;
    }
    writer.finish()?;
    if combinations.is_empty() {
        combinations.push(CombinationSegment {
            start: 0,
            a: config.combination.clone(),
        });
    }
    if truth.is_empty() {
        truth.push(TruthSegment {
            start: 0,
            theta_star: config.models.truth(),
        });
    }
    Ok(TruthFile {
        delta: config.delta,
        combinations,
        models: config.models.clone(),
        truth,
    })
}

/// Errors at one trace record; `None` without ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LearnRow {
    pub i: usize,
    pub a_error: Option<f64>,
    pub llr_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub rows: Vec<LearnRow>,
    pub a: DMatrix<f64>,
    pub llr: DMatrix<f64>,
    pub last_lambda: DMatrix<f64>,
}

impl LearnOutcome {
    pub fn learned(&self) -> LearnedJson {
        LearnedJson::new(&self.a, &self.llr)
    }

    /// CSV `i,a_error,llr_error`; missing errors are empty fields.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "a_error", "llr_error"])?;
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for r in &self.rows {
            w.write_record([r.i.to_string(), fmt(r.a_error), fmt(r.llr_error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the learner over trace records. With `truth`, errors are measured
/// against the combination matrix and `L̄` in force at each record, and
/// `known_llr` takes its matrix from the truth file.
pub fn learn_records<I>(
    records: I,
    config: &GslConfig,
    truth: Option<&TruthFile>,
) -> Result<LearnOutcome>
where
    I: IntoIterator<Item = Result<TraceRecord>>,
{
    let mut learner: Option<Learner> = None;
    let mut rows = Vec::new();
    let mut last_lambda = None;
    let mut lbar: Option<(usize, DMatrix<f64>)> = None;
    for rec in records {
        let rec = rec?;
        let lambda = rec.lambda_matrix()?;
        let l = match learner.as_mut() {
            Some(l) => l,
            None => learner.insert(Learner::new(*config, lambda.nrows(), lambda.ncols())?),
        };
        if let Some(t) = truth {
            let theta = t.theta_star_at(rec.i);
            if lbar.as_ref().is_none_or(|(th, _)| *th != theta) {
                let m = t.models.expected_llr_matrix(theta);
                l.set_known_llr(m.clone());
                lbar = Some((theta, m));
            }
        }
        l.observe(&lambda)?;
        let (a_error, llr_error) = match (truth, &lbar) {
            (Some(t), Some((_, m))) => (
                Some(reconstruction_error(
                    l.a(),
                    t.combination_at(rec.i).weights(),
                )?),
                Some(reconstruction_error(l.llr(), m)?),
            ),
            _ => (None, None),
        };
        rows.push(LearnRow {
            i: rec.i,
            a_error,
            llr_error,
        });
        last_lambda = Some(lambda);
    }
    let learner = learner.ok_or_else(|| Error::EmptyInput("trace has no records".into()))?;
    Ok(LearnOutcome {
        rows,
        a: learner.a().clone(),
        llr: learner.llr().clone(),
        last_lambda: last_lambda.unwrap_or_default(),
    })
}

/// Influence report from learned estimates and the trace's final `Λ`.
pub fn influence_from_learned(
    learned: &LearnedJson,
    last_lambda: &DMatrix<f64>,
) -> Result<InfluenceReport> {
    analyze(&learned.a_matrix()?, &learned.llr_matrix()?, last_lambda, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_trace;

    fn generated() -> SimulationSpec {
        serde_json::from_str(r#"{"n_agents":5,"edge_prob":0.5,"n_hypotheses":3,"delta":0.1,"n_iters":200,"burn_in":50,"seed":4}"#)
            .unwrap()
    }

    #[test]
    fn spec_forms() {
        assert!(matches!(generated(), SimulationSpec::Generated(_)));
        let cfg = generated().into_config().unwrap();
        let explicit: SimulationSpec =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(explicit, SimulationSpec::Explicit(cfg));
    }

    #[test]
    fn file_pipeline() {
        let cfg = generated().into_config().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let trace = dir.path().join("t.jsonl.gz");
        let truth = simulate_to_file(&cfg, &trace).unwrap();
        let records = read_trace(&trace).unwrap();
        assert_eq!(records.len(), 200);

        let expected = crate::simulator::run_simulation(&cfg).unwrap();
        assert_eq!(records, expected.to_records());
        assert_eq!(truth, TruthFile::from_trace(&expected, &cfg.models));

        let gsl = GslConfig::new(0.1, 0.1, 10);
        let out = learn_records(records.iter().cloned().map(Ok), &gsl, Some(&truth)).unwrap();
        assert_eq!(out.rows.len(), 200);
        assert!(out.rows.iter().all(|r| r.a_error.is_some()));
        let blind = learn_records(records.into_iter().map(Ok), &gsl, None).unwrap();
        assert_eq!(blind.a, out.a);
        assert!(blind.rows[0].a_error.is_none());
        let mut csv = Vec::new();
        blind.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .starts_with("i,a_error,llr_error\n0,,\n"));

        let report = influence_from_learned(&out.learned(), &out.last_lambda).unwrap();
        assert_eq!(report.n_agents(), 5);
    }
}
