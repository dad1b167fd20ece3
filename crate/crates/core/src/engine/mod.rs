//! Fixed-timestep simulation of one foraging trial.

pub mod events;
pub mod motion;
pub mod trial;
pub mod world;

pub use events::{DecisionRecord, Event, EventRecord};
pub use motion::{MotionLimits, RobotPose};
pub use trial::{run_trial, run_trial_with, Trial, TrialConfig, TrialResult};
pub use world::{try_deposit, try_pickup, CallTally, DepositEvent, Environment, PickupEvent, StarvationTiming};
