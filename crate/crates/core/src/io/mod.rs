//! Configuration files, columnar outputs and run manifests.

mod config;
mod manifest;
mod output;

pub use config::{parse_config, parse_config_str, ConfigFile, SCHEMA_VERSION};
pub use manifest::{
    hash_file, verify_dir, write_manifest, CheckRecord, DirLock, FileRecord, RunManifest, VerifyReport, MANIFEST_NAME,
};
pub use output::{
    format_float, read_custom_grid, read_two_photon_grid, write_curve, write_custom_grid, write_density,
    write_profile, write_series, CustomGrid, Header,
};
