// SPDX-License-Identifier: Apache-2.0

//! Runs the adaptive social learning recursion on a random network and
//! reports how often the majority of agents identifies the true state.
//!
//! ```text
//! cargo run --release --example simulate_asl [trace_out.jsonl[.gz]]
//! ```

use social_learning::experiment::{build_instance, ModelSpec, RunSeeds};
use social_learning::io::{write_trace, TruthFile};
use social_learning::simulator::{classification_rate, run_simulation, SimulationConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1);
    let seed = 3;
    let delta = 0.05;
    let inst = build_instance(20, 0.2, 5, 0, &ModelSpec::planted_three(), seed)?;
    let cfg = SimulationConfig::new(
        inst.combination,
        inst.models,
        delta,
        2000,
        RunSeeds::derive(seed).simulation,
    );
    println!(
        "burn-in {} iterations, then {} recorded",
        cfg.burn_in(),
        cfg.n_iters
    );

    let trace = run_simulation(&cfg)?;
    let rate = classification_rate(&trace);
    for i in [0, 9, 99, 999, 1999] {
        println!("r_{:<5} = {:.3}", i + 1, rate[i]);
    }

    let last = trace.steps.last().expect("non-empty trace");
    println!("final MAP estimates: {:?}", last.map);
    let row: Vec<String> = last
        .lambda
        .row(0)
        .iter()
        .map(|x| format!("{x:+.3}"))
        .collect();
    println!(
        "Λ of agent 0, log ψ(θ₀)/ψ(θ_j) for j = 1..4: {}",
        row.join(" ")
    );

    if let Some(path) = out {
        let path = std::path::Path::new(&path);
        write_trace(path, &trace.to_records())?;
        TruthFile::from_trace(&trace, &cfg.models).save(&path.with_extension("truth.json"))?;
        println!("trace written to {}", path.display());
    }
    Ok(())
}
