//! Evaluating a trained model with the metric table.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::conditioning::{build_prompt, DEFAULT_MANIPULATION};
use crate::degrade::DegradationKind;
use crate::error::{contract_err, Result};
use crate::image::{load_ppm, ImageBuffer};
use crate::metrics::Restorer;
use crate::model::UniProcessor;

/// Restores with the removal prompt for the applied kind, or for a fixed
/// subject when one is given.
pub struct ModelRestorer<'a> {
    pub model: &'a UniProcessor,
    pub subject: Option<String>,
}

impl ModelRestorer<'_> {
    pub fn prompt_for(&self, kind: DegradationKind) -> String {
        build_prompt(DEFAULT_MANIPULATION, self.subject.as_deref().unwrap_or(kind.name()))
    }
}

impl Restorer for ModelRestorer<'_> {
    fn restore(&self, degraded: &ImageBuffer, kind: DegradationKind) -> Result<ImageBuffer> {
        self.model.restore(degraded, &self.prompt_for(kind))
    }
}

/// Every readable PPM in `dir`, in file-name order.
pub fn load_testset(dir: &Path) -> Result<Vec<ImageBuffer>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut images = Vec::new();
    for p in paths {
        match load_ppm(&p) {
            Ok(img) => images.push(img),
            Err(e) => warn!("skipping {}: {e}", p.display()),
        }
    }
    if images.is_empty() {
        return Err(contract_err!("no readable test images in {}", dir.display()));
    }
    Ok(images)
}
