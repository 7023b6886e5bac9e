//! Experiment runner around the beamformer library: configuration schema
//! and the CSV-producing experiment drivers used by the `modalbeam` binary.

pub mod config;
pub mod experiments;
