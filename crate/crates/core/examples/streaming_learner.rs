// SPDX-License-Identifier: Apache-2.0

//! Simulator on a worker thread feeding the learner through a bounded queue.
//!
//! ```text
//! cargo run --release --example streaming_learner [iterations]
//! ```

use social_learning::experiment::{build_instance, ModelSpec, RunSeeds};
use social_learning::learner::{reconstruction_error, GslConfig, Learner};
use social_learning::simulator::{SimulationConfig, Simulator};
use social_learning::stream::run_streaming;

fn main() -> anyhow::Result<()> {
    let iters: usize = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let (n, h, delta, seed) = (12, 3, 0.05, 2);
    let inst = build_instance(n, 0.25, h, 0, &ModelSpec::all_weak(), seed)?;
    let cfg = SimulationConfig::new(
        inst.combination,
        inst.models,
        delta,
        iters,
        RunSeeds::derive(seed).simulation,
    );
    let learner = Learner::new(GslConfig::new(0.1, delta, 50), n, h - 1)?;

    let mut truth = cfg.combination.weights().clone();
    let started = std::time::Instant::now();
    let (_, learner) = run_streaming(Simulator::new(&cfg)?, iters, learner, 64, |item, l| {
        if let Some(a) = &item.combination {
            truth = a.weights().clone();
        }
        if (item.iteration + 1) % (iters / 5).max(1) == 0 {
            println!(
                "i = {:>6}: ‖A − A★‖² = {:.4e}",
                item.iteration + 1,
                reconstruction_error(l.a(), &truth)?
            );
        }
        Ok(())
    })?;
    println!(
        "{} learner updates in {:.2?}",
        learner.updates(),
        started.elapsed()
    );
    Ok(())
}
