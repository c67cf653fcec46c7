//! Package URLs and CycloneDX SBOM emission.

pub mod cyclonedx;
pub mod purl;

pub use cyclonedx::{emit_sbom, parse_sbom_purls, sbom_file_name};
pub use purl::{from_purl, to_purl, PackageUrl};
