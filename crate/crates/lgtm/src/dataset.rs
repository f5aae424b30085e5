//! Evaluation datasets: a directory of images plus `manifest.json`, a list of
//! `{file, direction}` records with paths relative to the directory.

use std::path::Path;

use lgtm_core::eval::{EvalSample, LightDirection};
use serde::{Deserialize, Serialize};

use crate::formats::{read_bytes, rgb_png, write_bytes};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub direction: LightDirection,
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    Ok(serde_json::from_slice(&read_bytes(&dir.join(MANIFEST))?)?)
}

/// Loads every image listed in the manifest. Sample ids are the file names.
pub fn load(dir: &Path) -> Result<Vec<EvalSample>> {
    read_manifest(dir)?
        .into_iter()
        .map(|entry| {
            let path = dir.join(&entry.file);
            let image = rgb_png::read(&path).map_err(|e| match e {
                Error::Io { .. } => e,
                other => Error::Format(format!("{}: {other}", path.display())),
            })?;
            Ok(EvalSample { id: entry.file, image, direction: entry.direction })
        })
        .collect()
}

/// Writes samples as `<id>.png` plus a manifest.
pub fn write(dir: &Path, samples: &[EvalSample]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(samples.len());
    for sample in samples {
        let file = format!("{}.png", sample.id);
        rgb_png::write(&dir.join(&file), &sample.image)?;
        manifest.push(ManifestEntry { file, direction: sample.direction });
    }
    write_bytes(&dir.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)
}
