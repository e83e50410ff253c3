//! Reliability-weighted aggregation for quantum federated learning on
//! heterogeneous, noisy hardware.

pub mod calib;
pub mod data;
pub mod exec;
pub mod fed;
pub mod harness;
pub mod metrics;
pub mod qsim;
pub mod seed;
pub mod train;
pub mod transpile;
pub mod vqc;
