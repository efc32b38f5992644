//! File formats: JSON run configuration, binary checkpoints and SVG plots.
//! All of them fix the scalar to `f64`.

mod checkpoint;
mod config;
mod svg;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use config::{load_config, parse_config, AmplitudeRange, OutputSection, RunConfig, SolverSection};
pub use svg::{render_svg, svg_document};

use std::path::Path;

use crate::error::Error;

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
