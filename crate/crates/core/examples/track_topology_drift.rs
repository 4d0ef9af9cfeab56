// SPDX-License-Identifier: Apache-2.0

//! The network rewires a few edges every `period` iterations; the
//! constant step size lets the learner follow it.
//!
//! ```text
//! cargo run --release --example track_topology_drift
//! ```

use social_learning::experiment::{builtin_scenario, run_scenario, topology_recovery_ratios};

fn main() -> anyhow::Result<()> {
    let mut cfg = builtin_scenario("fig7a_topology")?;
    cfg.seeds = vec![1];
    let period = cfg.schedule.topology.expect("drifting scenario").period;
    let res = run_scenario(&cfg)?;
    let series = &res.runs[0].series.a_error;
    println!("a_error just before each rewiring and at the end of the following period:");
    for (j, r) in topology_recovery_ratios(series, period).iter().enumerate() {
        let t = (j + 1) * period;
        println!(
            "  i = {t:>5}: before {:.4}, after {:.4}, ratio {r:.3}",
            series[t - 1],
            series[(t + period).min(series.len()) - 1]
        );
    }
    for c in &res.summary.checks {
        println!("[{}] {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    Ok(())
}
