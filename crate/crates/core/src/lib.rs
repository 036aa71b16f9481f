//! Joint receive beamforming, UAV-to-base-station association and UAV height
//! control for uplink cellular networks shared by ground users and UAVs.
//!
//! The solver maximizes the minimum UAV rate while every ground user keeps a
//! target SINR. Perfect channel knowledge and statistically imperfect
//! knowledge (estimate plus correlated error) are both supported.

pub mod association;
pub mod beamforming;
pub mod channel;
pub mod harness;
pub mod height;
pub mod linkmetrics;
pub mod numerics;
pub mod orchestrator;
pub mod scenario;
pub mod types;
