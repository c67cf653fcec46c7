//! Remote data sources: the OSV database and package registries.

pub mod osv;
pub mod registry;

pub use osv::{OsvBatchResult, OsvClient, OsvVulnRecord};
pub use registry::{RegistryClient, RegistryRelease, RegistryUrls};
