// SPDX-License-Identifier: Apache-2.0

//! Mini-batch proximal learner with an ℓ1 penalty, run with the small
//! step, small δ settings suited to slowly varying real-world opinions,
//! followed by an influence ranking.
//!
//! ```text
//! cargo run --release --example sparse_minibatch [iterations]
//! ```

use nalgebra::DMatrix;
use social_learning::experiment::{build_instance, ModelSpec, RunSeeds};
use social_learning::influence::analyze;
use social_learning::learner::{GslConfig, Learner};
use social_learning::simulator::{SimulationConfig, Simulator};

fn main() -> anyhow::Result<()> {
    let iters: usize = std::env::args().nth(1).map_or(Ok(6_000), |s| s.parse())?;
    let (n, h, delta, seed) = (20, 2, 1e-4, 8);
    let gsl = GslConfig {
        batch: 30,
        l1_weight: 0.006,
        ..GslConfig::new(3e-4, delta, 50)
    };
    let inst = build_instance(n, 0.2, h, 0, &ModelSpec::planted_three(), seed)?;
    let mut cfg = SimulationConfig::new(
        inst.combination,
        inst.models,
        delta,
        iters,
        RunSeeds::derive(seed).simulation,
    );
    cfg.burn_in = Some(2_000);
    let mut sim = Simulator::new(&cfg)?;
    let mut learner = Learner::new(gsl, n, h - 1)?;
    let mut last = DMatrix::zeros(n, h - 1);
    for _ in 0..iters {
        last = sim.step()?.lambda;
        learner.observe(&last)?;
    }
    println!(
        "{} samples in {} mini-batches",
        learner.updates(),
        learner.updates() / gsl.batch
    );
    let report = analyze(learner.a(), learner.llr(), &last, 0)?;
    println!("estimated true state θ{}", report.theta_star);
    println!("{:>5} {:>8} {:>8}", "agent", "u", "I/ΣI");
    for &k in report.top(5) {
        println!(
            "{k:>5} {:>8.4} {:>8.4}",
            report.centrality[k], report.normalized_informativeness[k]
        );
    }
    Ok(())
}
