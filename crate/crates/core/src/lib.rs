//! Ground-truth construction, tool adapters and evaluation for SCA benchmarks.

pub mod adapters;
pub mod canonical;
pub mod clients;
pub mod config;
pub mod diff;
pub mod error;
pub mod eval;
pub mod groundtruth;
pub mod model;
pub mod report;
pub mod sbom;
pub mod sim;
pub mod stats;
pub mod temporal;
pub mod transport;
pub mod version;

pub use error::{Error, Result};
