//! Deterministic central-place foraging simulation.
//!
//! Robots run the CPFA state machine on a fixed 0.1 s timestep. At three
//! decision points a [`policy::TacticalPolicy`] picks the next tactic; the
//! parameter cascade doubles as the fallback for every other policy.

pub mod cpfa;
pub mod engine;
pub mod geom;
pub mod layout;
pub mod params;
pub mod pheromone;
pub mod policy;
pub mod rng;
pub mod stats;
pub mod tuner;

pub use cpfa::{FsmState, ForagerMemory, Robot};
pub use engine::{run_trial, run_trial_with, EventRecord, Trial, TrialConfig, TrialResult};
pub use geom::{Arena, Vec2};
pub use layout::{Distribution, LayoutSpec};
pub use params::CpfaParams;
pub use policy::{PolicyKind, PolicyProvider, TacticalAction, TacticalPolicy};
pub use rng::RngStreams;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Spec(String),
    #[error("layout generation failed: {0}")]
    Layout(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
