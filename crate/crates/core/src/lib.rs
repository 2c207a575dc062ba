//! Task-offloading simulator for UAV-assisted smart-farm networks.
//!
//! UAVs hovering over a farm receive image-classification tasks from IoT
//! cameras and decide, per task, whether to process it locally, hand it to
//! another UAV, or forward it to a MEC server. The crate provides the
//! discrete-event simulator with its battery and deadline model, three
//! heuristic placement policies, tabular and deep Q-Learning agents, and the
//! experiment harness that trains, evaluates and compares them.

pub mod checkpoint;
pub mod config;
pub mod deep;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod explore;
pub mod mdp;
pub mod metrics;
pub mod policy;
pub mod queue;
pub mod rng;
pub mod sched;
pub mod sim;
pub mod tabular;

pub use config::Config;
pub use error::{Result, SimError};
pub use policy::{Policy, PolicyKind};
pub use sim::{run_episode, EpisodeOptions, EpisodeResult, EpisodeSeeds};
