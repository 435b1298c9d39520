//! Ranked-reward self-play for 2D/3D single-bin packing.
//!
//! The crate is organized bottom-up:
//!
//! - [`env`]: the packing MDP (states, legal actions, rewards);
//! - [`generator`] and [`instance_io`]: split-based instances and their file format;
//! - [`ranking`]: reward buffer, percentile threshold and ±1 reshaping;
//! - [`net`]: the permutation-invariant policy/value network;
//! - [`mcts`]: network-guided PUCT search and plain UCT with rollouts;
//! - [`trainer`]: the self-play training loop;
//! - [`baselines`] and [`eval`]: comparison agents and the evaluation harness.

pub mod baselines;
pub mod cli;
pub mod env;
pub mod eval;
pub mod generator;
pub mod instance_io;
pub mod mcts;
pub mod net;
pub mod ranking;
pub mod trainer;
