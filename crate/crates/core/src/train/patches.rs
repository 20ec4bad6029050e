//! Fixed-stride patch cropping and the JSON-lines manifest.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, contract_err, format_err, Result};
use crate::image::{crop, load_ppm, save_ppm, ImageBuffer};

/// One manifest line. Paths are relative: `patch` to the manifest's
/// directory, `source` to the source directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchEntry {
    pub patch: String,
    pub source: String,
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchManifest {
    pub entries: Vec<PatchEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

impl PatchManifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("plain struct serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format_err!("manifest line {}: {e}", i + 1)))
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    /// Reads every patch image; `dir` is the directory holding the manifest.
    pub fn load_patches(&self, dir: impl AsRef<Path>) -> Result<Vec<ImageBuffer>> {
        if self.entries.is_empty() {
            return Err(contract_err!("manifest has no entries"));
        }
        self.entries.iter().map(|e| load_ppm(dir.as_ref().join(&e.patch))).collect()
    }
}

/// Window origins along one axis: `0, stride, 2·stride, …` plus a final
/// origin clamped to `dim − size` when the grid stops short of the edge.
/// Empty when `dim < size`.
pub fn grid_positions(dim: usize, size: usize, stride: usize) -> Vec<usize> {
    if dim < size || size == 0 || stride == 0 {
        return Vec::new();
    }
    let last = dim - size;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("0 is always present") != last {
        out.push(last);
    }
    out
}

/// Crops every PPM in `src_dir` (sorted by name) into `size × size` patches
/// on a `stride` grid, writes them to `out_dir` and returns the manifest.
/// Unreadable and undersized images are skipped with a warning.
pub fn build_patches(src_dir: &Path, out_dir: &Path, size: usize, stride: usize) -> Result<PatchManifest> {
    if size == 0 || stride == 0 {
        return Err(config_err!("patch size and stride must be positive"));
    }
    let mut sources: Vec<PathBuf> = fs::read_dir(src_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    sources.sort();
    fs::create_dir_all(out_dir)?;

    let mut manifest = PatchManifest::default();
    for path in sources {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let img = match load_ppm(&path) {
            Ok(img) => img,
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let (h, w) = img.dims();
        if h < size || w < size {
            warn!("skipping {name}: {w}×{h} is smaller than {size}×{size}");
            continue;
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for &y in &grid_positions(h, size, stride) {
            for &x in &grid_positions(w, size, stride) {
                let patch_name = format!("{stem}_{y}_{x}.ppm");
                save_ppm(out_dir.join(&patch_name), &crop(&img, x, y, size, size)?)?;
                manifest.entries.push(PatchEntry {
                    patch: patch_name,
                    source: name.clone(),
                    x,
                    y,
                    size,
                });
            }
        }
    }
    if manifest.entries.is_empty() {
        return Err(contract_err!("no usable images in {}", src_dir.display()));
    }
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        assert_eq!(grid_positions(928, 512, 416), vec![0, 416]);
        assert_eq!(grid_positions(512, 512, 416), vec![0]);
        assert_eq!(grid_positions(1000, 512, 416), vec![0, 416, 488]);
        assert!(grid_positions(500, 512, 416).is_empty());
    }

    #[test]
    fn manifest_lines_round_trip() {
        let m = PatchManifest {
            entries: vec![PatchEntry {
                patch: "a_0_0.ppm".into(),
                source: "a.ppm".into(),
                x: 0,
                y: 0,
                size: 64,
            }],
        };
        let text = m.to_jsonl();
        assert_eq!(text, "{\"patch\":\"a_0_0.ppm\",\"source\":\"a.ppm\",\"x\":0,\"y\":0,\"size\":64}\n");
        assert_eq!(PatchManifest::from_jsonl(&text).unwrap(), m);
        assert!(PatchManifest::from_jsonl("{\"patch\":1}").is_err());
    }
}
