use std::path::Path;

use orient_core::error::Result;

use crate::config::RunConfig;
use crate::dataset::{generate, Manifest};

/// Generate the dataset directory (clouds plus manifest).
pub fn cmd_gen(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    generate(cfg, out_dir)
}
