pub mod assessment;
pub mod cognitive;
pub mod config;
pub mod dataset;
pub mod memory;
pub mod metrics;
pub mod provider;
pub mod simulation;
pub mod types;
