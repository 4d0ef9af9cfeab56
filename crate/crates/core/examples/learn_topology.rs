// SPDX-License-Identifier: Apache-2.0

//! Learns the combination matrix online from public log-beliefs only and
//! compares it with the batch closed-form estimate.
//!
//! ```text
//! cargo run --release --example learn_topology [iterations]
//! ```

use nalgebra::DMatrix;
use social_learning::experiment::{build_instance, ModelSpec, RunSeeds};
use social_learning::learner::{reconstruction_error, DeltaMoments, GslConfig, Learner};
use social_learning::simulator::{SimulationConfig, Simulator};

fn row(m: &DMatrix<f64>, r: usize) -> String {
    m.row(r)
        .iter()
        .map(|x| format!("{x:6.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> anyhow::Result<()> {
    let iters: usize = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let (n, h, delta, seed) = (10, 3, 0.05, 11);
    let models = ModelSpec {
        influential: Vec::new(),
        sigma2_influential: 0.5,
        sigma2_other: 0.5,
    };
    let inst = build_instance(n, 0.3, h, 0, &models, seed)?;
    let truth = inst.combination.weights().clone();
    let lbar = inst.models.expected_llr_matrix(0);
    let cfg = SimulationConfig::new(
        inst.combination,
        inst.models,
        delta,
        iters,
        RunSeeds::derive(seed).simulation,
    );
    let mut sim = Simulator::new(&cfg)?;

    let mut learner = Learner::new(GslConfig::new(0.1, delta, 50), n, h - 1)?;
    let mut moments = DeltaMoments::new(50, n, h - 1);
    println!("{:>8} {:>12} {:>12}", "i", "‖A−A★‖²", "‖L̂−L̄‖²");
    for i in 0..iters {
        let lambda = sim.step()?.lambda;
        learner.observe(&lambda)?;
        moments.push(&lambda);
        if (i + 1) % (iters / 10).max(1) == 0 {
            println!(
                "{:>8} {:>12.4e} {:>12.4e}",
                i + 1,
                reconstruction_error(learner.a(), &truth)?,
                reconstruction_error(learner.llr(), &lbar)?
            );
        }
    }
    let batch = moments.minimizer(delta)?;
    println!(
        "closed-form estimate: ‖A−A★‖² = {:.4e}",
        reconstruction_error(&batch, &truth)?
    );
    println!("row 0 true    {}", row(&truth, 0));
    println!("row 0 learned {}", row(learner.a(), 0));
    println!("row 0 batch   {}", row(&batch, 0));
    Ok(())
}
