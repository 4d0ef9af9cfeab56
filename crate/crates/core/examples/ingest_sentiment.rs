// SPDX-License-Identifier: Apache-2.0

//! Converts scored posts into daily log-belief ratios, exports them as a
//! trace, and feeds that trace to the learner.
//!
//! ```text
//! cargo run --example ingest_sentiment [posts.csv]
//! ```
//!
//! Without an argument a small synthetic CSV is generated.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use social_learning::ingest::{
    build_belief_series, export_trace, load_sentiment_csv, read_sentiment_csv,
};
use social_learning::io::TraceReader;
use social_learning::learner::GslConfig;
use social_learning::pipeline::learn_records;

fn synthetic_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut csv = String::from("agent_id,timestamp_iso8601,p_neg,p_neu,p_pos\n");
    let users = ["ada", "bo", "cy", "di"];
    let mut mood = [0.0f64; 4];
    for day in 0..60 {
        for (k, u) in users.iter().enumerate() {
            // each user drifts toward the previous user's mood
            mood[k] = 0.8 * mood[k] + 0.2 * mood[(k + 3) % 4] + rng.random_range(-0.6..0.6);
            if rng.random_bool(0.3) {
                continue;
            }
            let pos = 1.0 / (1.0 + (-mood[k]).exp());
            let neu = rng.random_range(0.0..0.4);
            let p_pos = (1.0 - neu) * pos;
            let p_neg = 1.0 - neu - p_pos;
            let hour = rng.random_range(0..24);
            writeln!(
                csv,
                "{u},2022-03-{:02}T{hour:02}:15:00Z,{p_neg},{neu},{p_pos}",
                1 + day % 28
            )
            .unwrap();
        }
    }
    csv
}

fn main() -> anyhow::Result<()> {
    let records = match std::env::args().nth(1) {
        Some(p) => load_sentiment_csv(std::path::Path::new(&p))?,
        None => read_sentiment_csv(synthetic_csv().as_bytes())?,
    };
    let series = build_belief_series(&records, 0.0)?;
    println!(
        "{} posts → {} agents × {} days from {}",
        records.len(),
        series.n_agents(),
        series.n_days(),
        series.first_day
    );
    for (k, a) in series.agents.iter().enumerate() {
        let vals: Vec<String> = (0..series.n_days().min(6))
            .map(|d| format!("{:+.2}", series.value(d, k)))
            .collect();
        println!("  {a:<4} {}", vals.join(" "));
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("days.jsonl");
    export_trace(&series, &path)?;
    let cfg = GslConfig::new(0.05, 0.1, 5);
    let out = learn_records(TraceReader::open(&path)?, &cfg, None)?;
    println!("learned combination matrix (column k: weights agent k gives its neighbors):");
    for r in out.a.row_iter() {
        println!(
            "  {}",
            r.iter()
                .map(|x| format!("{x:+.2}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
    Ok(())
}
