// SPDX-License-Identifier: Apache-2.0

//! Simulator and learner on separate threads, joined by a bounded queue.
//! The producer blocks when the queue is full.

use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::{self, JoinHandle};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::CombinationMatrix;
use crate::learner::Learner;
use crate::simulator::Simulator;

/// One recorded iteration as seen by the consumer.
#[derive(Debug, Clone)]
pub struct StreamItem {
    pub iteration: usize,
    pub lambda: DMatrix<f64>,
    pub theta_star: usize,
    /// New combination matrix, present when the topology changed at this iteration.
    pub combination: Option<CombinationMatrix>,
}

/// Runs `n_iters` recorded simulator steps on a worker thread. The
/// simulator is handed back by the join handle.
pub fn spawn_producer(
    mut sim: Simulator,
    n_iters: usize,
    capacity: usize,
) -> (Receiver<Result<StreamItem>>, JoinHandle<Simulator>) {
    let (tx, rx) = sync_channel(capacity.max(1));
    let handle = thread::spawn(move || {
        for _ in 0..n_iters {
            let item = sim.step().map(|out| StreamItem {
                iteration: out.iteration,
                combination: out.combination_changed.then(|| sim.combination().clone()),
                lambda: out.lambda,
                theta_star: out.theta_star,
            });
            let failed = item.is_err();
            if tx.send(item).is_err() || failed {
                break;
            }
        }
        sim
    });
    (rx, handle)
}

/// Feeds every streamed `Λ` to `learner`, calling `on_update` after each.
pub fn run_streaming<F>(
    sim: Simulator,
    n_iters: usize,
    mut learner: Learner,
    capacity: usize,
    mut on_update: F,
) -> Result<(Simulator, Learner)>
where
    F: FnMut(&StreamItem, &Learner) -> Result<()>,
{
    let (rx, handle) = spawn_producer(sim, n_iters, capacity);
    let mut outcome = Ok(());
    for item in rx.iter() {
        let step = item.and_then(|item| {
            learner.observe(&item.lambda)?;
            on_update(&item, &learner)
        });
        if let Err(e) = step {
            outcome = Err(e);
            break;
        }
    }
    // dropping the receiver unblocks a producer waiting on a full queue
    drop(rx);
    let sim = handle
        .join()
        .map_err(|_| Error::InvalidParameter("simulator thread panicked".into()))?;
    outcome.map(|()| (sim, learner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_erdos_renyi, uniform_combination_matrix};
    use crate::learner::GslConfig;
    use crate::likelihood::{generate_models, HypothesisSet};
    use crate::simulator::SimulationConfig;

    fn config() -> SimulationConfig {
        let a = uniform_combination_matrix(&generate_erdos_renyi(6, 0.4, 3).unwrap());
        let m = generate_models(HypothesisSet::new(3, 0, 0).unwrap(), &[0.3; 6], 4).unwrap();
        SimulationConfig::new(a, m, 0.1, 300, 9)
    }

    #[test]
    fn matches_sequential_run() {
        let cfg = config();
        let gsl = GslConfig::new(0.05, 0.1, 5);
        let mut seq = Learner::new(gsl, 6, 2).unwrap();
        let mut sim = Simulator::new(&cfg).unwrap();
        for _ in 0..cfg.n_iters {
            seq.observe(&sim.step().unwrap().lambda).unwrap();
        }
        let mut seen = Vec::new();
        let (_, streamed) = run_streaming(
            Simulator::new(&cfg).unwrap(),
            cfg.n_iters,
            Learner::new(gsl, 6, 2).unwrap(),
            2,
            |item, _| {
                seen.push(item.iteration);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, (0..cfg.n_iters).collect::<Vec<_>>());
        assert_eq!(streamed.a(), seq.a());
        assert_eq!(streamed.llr(), seq.llr());
    }

    #[test]
    fn consumer_error_stops_producer() {
        let cfg = config();
        let learner = Learner::new(GslConfig::new(0.05, 0.1, 5), 6, 2).unwrap();
        let res = run_streaming(
            Simulator::new(&cfg).unwrap(),
            10_000,
            learner,
            1,
            |item, _| {
                if item.iteration == 3 {
                    Err(Error::InvalidParameter("stop".into()))
                } else {
                    Ok(())
                }
            },
        );
        assert!(matches!(res, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn first_item_carries_combination() {
        let cfg = config();
        let (rx, h) = spawn_producer(Simulator::new(&cfg).unwrap(), 3, 4);
        let items: Vec<StreamItem> = rx.iter().map(|r| r.unwrap()).collect();
        h.join().unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items[0].combination.as_ref(), Some(&cfg.combination));
        assert!(items[1].combination.is_none());
    }
}
