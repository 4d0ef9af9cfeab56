// SPDX-License-Identifier: Apache-2.0

//! Adaptive social learning on directed graphs: simulate agents that
//! exchange beliefs, learn the combination matrix back from belief traces,
//! and rank agents by influence.

pub mod error;
pub mod experiment;
pub mod graph;
pub mod influence;
pub mod ingest;
pub mod io;
pub mod learner;
pub mod likelihood;
pub mod pipeline;
pub mod simulator;
pub mod stream;

pub use error::{Error, Result};
pub use graph::{CombinationMatrix, DirectedGraph, PerronVector};
pub use influence::InfluenceReport;
pub use learner::{GslConfig, Learner};
pub use likelihood::{HypothesisSet, LikelihoodModel};
pub use simulator::{SimulationConfig, SimulationTrace, Simulator};
