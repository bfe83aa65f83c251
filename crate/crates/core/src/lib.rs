//! Tabular episodic Q-learning with early-settled reference-advantage
//! updates, a UCB-Q-Hoeffding baseline, and a harness that measures exact
//! regret and checks the learners' invariants while they run.
//!
//! Indices are 0-based throughout (steps, states, actions, episodes).

pub mod agents;
pub mod cli;
pub mod config;
pub mod env_gen;
pub mod harness;
pub mod mdp;
pub mod plot;
pub mod rate;
pub mod rng;

pub use agents::{Agent, Algorithm, EsaAgent, Hyperparams, UcbQAgent};
pub use config::{EnvSource, RunConfig};
pub use env_gen::GeneratorSpec;
pub use harness::{run_experiment, CheckLevel, ExperimentSpec, InitStateSchedule, RegretRecord};
pub use mdp::{optimal_values, policy_values, DeterministicPolicy, TabularMdp, Transition, ValueTables};
