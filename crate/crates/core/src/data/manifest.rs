//! Line-oriented dataset manifest.
//!
//! ```text
//! # comment
//! @resolution 128 128
//! <id> <image-path> <mask-path> [<class>]
//! ```
//!
//! Fields are separated by whitespace. Relative paths resolve against the
//! directory holding the manifest. Without a `@resolution` line the working
//! resolution defaults to 128x128.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{ingest_pair, Dataset, Sample};
use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION: (usize, usize) = (128, 128);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
    pub class: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub resolution: (usize, usize),
}

impl DatasetManifest {
    /// Parses manifest text. Paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut resolution = None;
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if let Some(directive) = fields[0].strip_prefix('@') {
                if directive != "resolution" {
                    return Err(Error::Parse(format!("line {lineno}: unknown directive `@{directive}`")));
                }
                if resolution.is_some() || !entries.is_empty() {
                    return Err(Error::Parse(format!(
                        "line {lineno}: `@resolution` must appear once, before any entry"
                    )));
                }
                resolution = Some(parse_resolution(&fields[1..]).map_err(|m| Error::Parse(format!("line {lineno}: {m}")))?);
                continue;
            }
            if !(3..=4).contains(&fields.len()) {
                return Err(Error::Parse(format!(
                    "line {lineno}: expected `id image mask [class]`, found {} fields",
                    fields.len()
                )));
            }
            let id = fields[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::Parse(format!("line {lineno}: duplicate image id `{id}`")));
            }
            entries.push(ManifestEntry {
                id,
                image: base.join(fields[1]),
                mask: base.join(fields[2]),
                class: fields.get(3).map(|s| s.to_string()),
            });
        }
        Ok(Self {
            entries,
            resolution: resolution.unwrap_or(DEFAULT_RESOLUTION),
        })
    }

    /// Serializes with paths relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let mut out = format!("@resolution {} {}\n", self.resolution.0, self.resolution.1);
        for e in &self.entries {
            let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
            write!(out, "{} {} {}", e.id, rel(&e.image), rel(&e.mask)).unwrap();
            if let Some(class) = &e.class {
                write!(out, " {class}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Ingests every entry at the manifest resolution, in manifest order.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let samples = self
            .entries
            .par_iter()
            .map(|e| {
                let (image, mask) = ingest_pair(&e.image, &e.mask, self.resolution)?;
                if mask.is_empty() {
                    return Err(Error::EmptyGroundTruth(e.id.clone()));
                }
                Ok(Sample {
                    id: e.id.clone(),
                    class: e.class.clone(),
                    image,
                    mask,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            resolution: self.resolution,
            samples,
        })
    }
}

fn parse_resolution(fields: &[&str]) -> std::result::Result<(usize, usize), String> {
    let [h, w] = fields else {
        return Err("`@resolution` takes two integers".into());
    };
    let parse = |s: &str| s.parse::<usize>().ok().filter(|&v| v > 0);
    match (parse(h), parse(w)) {
        (Some(h), Some(w)) => Ok((h, w)),
        _ => Err(format!("invalid resolution `{h} {w}`")),
    }
}

/// Reads and validates a manifest: ids unique, files present, every mask
/// nonempty after ingestion. Returns the manifest together with the
/// ingested samples.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(DatasetManifest, Dataset)> {
    load_manifest_at(path, None)
}

/// As [`load_manifest`], with an optional resolution override.
pub fn load_manifest_at(path: impl AsRef<Path>, resolution: Option<(usize, usize)>) -> Result<(DatasetManifest, Dataset)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut manifest = DatasetManifest::parse(&text, base)?;
    if let Some(res) = resolution {
        manifest.resolution = res;
    }
    for e in &manifest.entries {
        for p in [&e.image, &e.mask] {
            if !p.is_file() {
                return Err(Error::MissingFile(p.clone()));
            }
        }
    }
    let dataset = manifest.load_dataset()?;
    Ok((manifest, dataset))
}
