// SPDX-License-Identifier: Apache-2.0

//! Random strongly connected graph, uniform combination weights, and the
//! Perron eigenvector as agent centrality.
//!
//! ```text
//! cargo run --example perron_centrality [n_agents] [edge_prob] [seed]
//! ```

use social_learning::graph::{centrality, generate_erdos_renyi, uniform_combination_matrix};
use social_learning::influence::rank_agents;
use social_learning::io::write_perron_csv;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(12), |s| s.parse())?;
    let p: f64 = args.get(1).map_or(Ok(0.25), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(1), |s| s.parse())?;

    let g = generate_erdos_renyi(n, p, seed)?;
    let a = uniform_combination_matrix(&g);
    let u = centrality(&a)?;
    println!(
        "{n} agents, {} directed edges (self-loops included)",
        g.edge_count()
    );

    let residual = (a.weights() * u.entries() - u.entries()).amax();
    println!(
        "‖Au − u‖∞ = {residual:.2e}, Σu = {:.12}",
        u.as_slice().iter().sum::<f64>()
    );

    println!("most central agents:");
    for k in rank_agents(u.as_slice()).into_iter().take(5) {
        let in_deg = g.in_neighbors(k).count();
        println!("  agent {k:>2}: u = {:.4}, in-neighbors = {in_deg}", u[k]);
    }

    println!("\nCSV:");
    write_perron_csv(&u, std::io::stdout().lock())?;
    Ok(())
}
