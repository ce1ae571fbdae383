//! Simulation and verification tools for the Biggins martingale of a
//! supercritical branching random walk.

pub mod bede;
pub mod clt;
pub mod engine;
pub mod error;
pub mod lil;
pub mod model;
pub mod moments;
pub mod rng;
pub mod stats;
pub mod sum;
pub mod tilt;

pub use engine::{Generation, TailEstimate, TrajectoryRecord, DEFAULT_POPULATION_CAP};
pub use error::{Error, Result};
pub use model::{ConditionReport, KindName, OffspringModel};
pub use moments::{CovQuery, MomentSet, RenewalConstant};
pub use rng::StreamKey;
pub use stats::KsResult;
