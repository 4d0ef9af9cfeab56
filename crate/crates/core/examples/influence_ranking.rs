// SPDX-License-Identifier: Apache-2.0

//! Ranks agents by informativeness (centrality times KL mass) from learned
//! quantities and compares with the ranking computed from the true network.
//!
//! ```text
//! cargo run --release --example influence_ranking [iterations] [seed]
//! ```

use nalgebra::DMatrix;
use social_learning::experiment::{build_instance, compare_influence, ModelSpec, RunSeeds};
use social_learning::influence::{analyze, ground_truth_report};
use social_learning::learner::{GslConfig, Learner};
use social_learning::simulator::{SimulationConfig, Simulator};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let iters: usize = args.first().map_or(Ok(50_000), |s| s.parse())?;
    let seed: u64 = args.get(1).map_or(Ok(1), |s| s.parse())?;
    let (n, h, delta) = (20, 5, 0.05);
    let inst = build_instance(n, 0.2, h, 0, &ModelSpec::planted_three(), seed)?;
    let truth = ground_truth_report(&inst.combination, &inst.models, 0)?;

    let cfg = SimulationConfig::new(
        inst.combination,
        inst.models,
        delta,
        iters,
        RunSeeds::derive(seed).simulation,
    );
    let mut sim = Simulator::new(&cfg)?;
    let mut learner = Learner::new(GslConfig::new(0.1, delta, 50), n, h - 1)?;
    let mut last = DMatrix::zeros(n, h - 1);
    for _ in 0..iters {
        last = sim.step()?.lambda;
        learner.observe(&last)?;
    }
    let report = analyze(learner.a(), learner.llr(), &last, 0)?;

    println!("estimated true state: θ{}", report.theta_star);
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10}",
        "agent", "u", "I", "u (true)", "I (true)"
    );
    for &k in report.top(8) {
        println!(
            "{k:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            report.centrality[k],
            report.informativeness[k],
            truth.centrality[k],
            truth.informativeness[k]
        );
    }
    println!(
        "learned top-3 {:?}, true top-3 {:?}",
        report.top(3),
        truth.top(3)
    );
    println!(
        "top-3 overlap: {:.0}%",
        100.0 * compare_influence(&report, &truth, 3)
    );
    Ok(())
}
