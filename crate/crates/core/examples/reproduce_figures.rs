// SPDX-License-Identifier: Apache-2.0

//! Runs the built-in synthetic scenarios and prints their summaries.
//!
//! ```text
//! cargo run --release --example reproduce_figures [out_dir] [scenario …]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use social_learning::experiment::{builtin_scenario, run_scenario, BUILTIN_SCENARIOS};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/figures".into()));
    let names: Vec<String> = args.collect();
    let names: Vec<&str> = if names.is_empty() {
        BUILTIN_SCENARIOS.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    for name in names {
        let start = Instant::now();
        let res = run_scenario(&builtin_scenario(name)?)?;
        res.write_outputs(&out)?;
        println!("{name} ({:.1}s)", start.elapsed().as_secs_f64());
        for arm in &res.summary.arms {
            println!(
                "  {:<12} a_error={:<12} llr_error={:<12} r={:<8} topk={:?}",
                arm.label,
                arm.steady_a_error
                    .map_or("-".into(), |x| format!("{x:.4e}")),
                arm.steady_llr_error
                    .map_or("-".into(), |x| format!("{x:.4e}")),
                arm.terminal_rate.map_or("-".into(), |x| format!("{x:.4}")),
                arm.topk_scores,
            );
        }
        for c in &res.summary.checks {
            println!(
                "  [{}] {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
        }
    }
    Ok(())
}
