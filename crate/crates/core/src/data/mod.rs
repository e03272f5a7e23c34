//! Datasets: manifests, raster ingestion and synthetic families.

mod ingest;
mod manifest;
mod synth;

pub use ingest::{
    encode_png, image_from_bytes, image_to_rgb8, ingest_pair, mask_to_gray8, read_image, read_mask, to_image, to_mask,
    write_image, write_mask,
};
pub use manifest::{load_manifest, load_manifest_at, DatasetManifest, ManifestEntry, DEFAULT_RESOLUTION};
pub use synth::{mask_eccentricity, synth_dataset, synth_sample, Family, MAX_AREA_FRACTION, MIN_AREA_FRACTION};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::neuro::Image;

/// One image with its ground truth, at the working resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub class: Option<String>,
    pub image: Image,
    pub mask: BinaryMask,
}

/// Ingested samples in manifest order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub resolution: (usize, usize),
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Nonempty, every mask nonempty, every sample at the working resolution.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for s in &self.samples {
            if s.image.dims() != self.resolution {
                return Err(Error::dims(self.resolution, s.image.dims()));
            }
            if s.mask.dims() != self.resolution {
                return Err(Error::dims(self.resolution, s.mask.dims()));
            }
            if s.mask.is_empty() {
                return Err(Error::EmptyGroundTruth(s.id.clone()));
            }
        }
        Ok(())
    }

    /// Writes `images/<id>.png`, `masks/<id>.png` and `manifest.txt` under
    /// `dir`; returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let images = dir.join("images");
        let masks = dir.join("masks");
        std::fs::create_dir_all(&images)?;
        std::fs::create_dir_all(&masks)?;
        let mut entries = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let ip = images.join(format!("{}.png", s.id));
            let mp = masks.join(format!("{}.png", s.id));
            write_image(&s.image, &ip)?;
            write_mask(&s.mask, &mp)?;
            entries.push(ManifestEntry {
                id: s.id.clone(),
                image: ip,
                mask: mp,
                class: s.class.clone(),
            });
        }
        let manifest = DatasetManifest {
            entries,
            resolution: self.resolution,
        };
        let path = dir.join("manifest.txt");
        std::fs::write(&path, manifest.to_text(dir))?;
        Ok(path)
    }
}
