// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use social_learning::experiment::{
    builtin_scenario, run_scenario, ScenarioConfig, BUILTIN_SCENARIOS,
};
use social_learning::influence::{ground_truth_report, InfluenceReport};
use social_learning::ingest::{build_belief_series, export_trace, load_sentiment_csv};
use social_learning::io::{LearnedJson, TraceReader, TruthFile};
use social_learning::learner::GslConfig;
use social_learning::pipeline::{
    influence_from_learned, learn_records, simulate_to_file, SimulationSpec,
};

#[derive(Parser)]
#[command(
    version,
    about = "Adaptive social learning: simulate, learn the graph back, rank influence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the belief recursion and write a log-belief trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trace path; a `.gz` suffix compresses it.
        #[arg(long)]
        out: PathBuf,
        /// Ground truth (combination matrices, models, true state) for later scoring.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Learn the combination matrix and log-likelihood ratios from a trace.
    Learn {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Rank agents from learned estimates.
    Influence {
        #[arg(long)]
        learned: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Report JSON; a CSV is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn scored posts into a daily log-belief trace.
    Ingest {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hours added to UTC before bucketing posts into days.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tz_offset: f64,
    },
    /// Run a built-in or JSON-defined scenario; exits nonzero on failed checks.
    Experiment {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct ReportFile {
    #[serde(flatten)]
    learned: InfluenceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth: Option<InfluenceReport>,
}

#[derive(Serialize)]
struct IngestIndex {
    agents: Vec<String>,
    first_day: chrono::NaiveDate,
    n_days: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

fn load_scenario(arg: &str) -> anyhow::Result<ScenarioConfig> {
    if BUILTIN_SCENARIOS.contains(&arg) {
        return Ok(builtin_scenario(arg)?);
    }
    let path = Path::new(arg);
    if !path.exists() {
        bail!(
            "`{arg}` is neither a file nor one of {}",
            BUILTIN_SCENARIOS.join(", ")
        );
    }
    Ok(ScenarioConfig::from_json(&fs::read_to_string(path)?)?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            truth_out,
        } => {
            let cfg = SimulationSpec::load(&config)
                .with_context(|| format!("reading {}", config.display()))?
                .into_config()?;
            let truth = simulate_to_file(&cfg, &out)?;
            if let Some(p) = truth_out {
                truth.save(&p)?;
            }
            log::info!("wrote {} iterations to {}", cfg.n_iters, out.display());
        }
        Command::Learn {
            trace,
            config,
            out,
            truth,
        } => {
            let gsl: GslConfig = serde_json::from_str(&fs::read_to_string(&config)?)
                .with_context(|| format!("reading {}", config.display()))?;
            let truth = truth.map(|p| TruthFile::load(&p)).transpose()?;
            let res = learn_records(TraceReader::open(&trace)?, &gsl, truth.as_ref())?;
            fs::create_dir_all(&out)?;
            res.write_csv(BufWriter::new(File::create(out.join("errors.csv"))?))?;
            res.learned().save(&out.join("learned.json"))?;
            if let Some(last) = res.rows.last() {
                if let (Some(a), Some(l)) = (last.a_error, last.llr_error) {
                    println!("final a_error={a:.6e} llr_error={l:.6e}");
                }
            }
        }
        Command::Influence {
            learned,
            trace,
            truth,
            out,
        } => {
            let learned = LearnedJson::load(&learned)?;
            let mut last = None;
            for rec in TraceReader::open(&trace)? {
                last = Some(rec?);
            }
            let last = last.context("trace has no records")?;
            let report = influence_from_learned(&learned, &last.lambda_matrix()?)?;
            let ground_truth = truth
                .map(|p| -> anyhow::Result<_> {
                    let t = TruthFile::load(&p)?;
                    Ok(ground_truth_report(
                        t.combination_at(last.i),
                        &t.models,
                        t.theta_star_at(last.i),
                    )?)
                })
                .transpose()?;
            report.write_csv(BufWriter::new(File::create(out.with_extension("csv"))?))?;
            println!("top agents: {:?}", report.top(5));
            if let Some(g) = &ground_truth {
                println!("true top:   {:?}", g.top(5));
            }
            write_json(
                &out,
                &ReportFile {
                    learned: report,
                    ground_truth,
                },
            )?;
        }
        Command::Ingest {
            posts,
            out,
            tz_offset,
        } => {
            let records = load_sentiment_csv(&posts)?;
            let series = build_belief_series(&records, tz_offset)?;
            export_trace(&series, &out)?;
            let index = IngestIndex {
                agents: series.agents.clone(),
                first_day: series.first_day,
                n_days: series.n_days(),
            };
            write_json(&out.with_extension("agents.json"), &index)?;
            println!("{} agents over {} days", series.n_agents(), series.n_days());
        }
        Command::Experiment { scenario, out } => {
            let cfg = load_scenario(&scenario)?;
            let res = run_scenario(&cfg)?;
            res.write_outputs(&out)?;
            for c in &res.summary.checks {
                println!("[{}] {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
            }
            return Ok(res.summary.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
