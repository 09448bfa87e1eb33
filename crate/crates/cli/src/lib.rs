//! Library surface of the pipeline CLI, exposed so integration tests can
//! drive stages in-process as well as through the binary.

pub mod bench;
pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;
pub mod sweeps;
