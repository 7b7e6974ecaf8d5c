//! Directory layout: `images/`, `masks/` and optional `fov/`, files paired
//! by stem (`images/21.png` goes with `masks/21.png` and `fov/21.png`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::plan::ChannelPolicy;
use crate::png_io::{load_image, load_mask};
use crate::raster::Sample;

pub const IMAGES_DIR: &str = "images";
pub const MASKS_DIR: &str = "masks";
pub const FOV_DIR: &str = "fov";

/// PNG files in `dir` keyed by stem, sorted.
pub fn png_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !is_png || !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

/// Loads one sample by stem from a dataset root.
pub fn load_sample(root: &Path, stem: &str, channels: ChannelPolicy) -> Result<Sample> {
    let load = || -> Result<Sample> {
        let mut image = load_image(root.join(IMAGES_DIR).join(format!("{stem}.png")))?;
        if channels == ChannelPolicy::Green && image.channels() == 3 {
            image = image.channel(1);
        }
        let vessels = load_mask(root.join(MASKS_DIR).join(format!("{stem}.png")))?;
        if vessels.coerced {
            log::warn!("{stem}: vessel mask had values other than 0/max; binarized at 0.5");
        }
        let fov_path = root.join(FOV_DIR).join(format!("{stem}.png"));
        let fov = if fov_path.is_file() {
            let f = load_mask(&fov_path)?;
            if f.coerced {
                log::warn!("{stem}: fov mask had values other than 0/max; binarized at 0.5");
            }
            Some(f.mask)
        } else {
            None
        };
        Sample::new(stem, image, vessels.mask, fov)
    };
    load().map_err(|e| e.in_sample(stem))
}

/// Loads every sample under `root`, ordered by stem. Every image needs a mask.
pub fn load_dataset(root: &Path, channels: ChannelPolicy) -> Result<Vec<Sample>> {
    let images = png_stems(&root.join(IMAGES_DIR))?;
    let masks = png_stems(&root.join(MASKS_DIR))?;
    if let Some(stem) = images.keys().find(|s| !masks.contains_key(*s)) {
        return Err(Error::Sample {
            id: stem.clone(),
            source: Box::new(Error::io(
                root.join(MASKS_DIR).join(format!("{stem}.png")),
                std::io::Error::new(std::io::ErrorKind::NotFound, "missing vessel mask"),
            )),
        });
    }
    images.keys().map(|stem| load_sample(root, stem, channels)).collect()
}
