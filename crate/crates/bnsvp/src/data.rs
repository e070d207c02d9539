//! Bags, datasets, video segmentation, and the on-disk feature format.
//!
//! A video arrives as a clip-level feature matrix, gets pooled into a fixed
//! number of temporal segments, and is stored as a [`Bag`] carrying a
//! video-level label and (optionally) per-segment labels for evaluation.
//! Datasets are exchanged on disk as a JSON manifest plus one binary feature
//! file per video.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic bytes opening every binary feature file.
pub const FEATURE_MAGIC: [u8; 4] = *b"BSVP";

/// Feature file and manifest format version this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

/// Video-level label of a bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BagLabel {
    Normal,
    Abnormal,
}

impl BagLabel {
    /// Wire encoding used by the manifest (`0` normal, `1` abnormal).
    pub fn as_u8(self) -> u8 {
        match self {
            BagLabel::Normal => 0,
            BagLabel::Abnormal => 1,
        }
    }

    /// Parses the wire encoding.
    pub fn from_u8(value: u8) -> Result<Self> {
        match value {
            0 => Ok(BagLabel::Normal),
            1 => Ok(BagLabel::Abnormal),
            other => Err(Error::Format(format!(
                "bag label must be 0 or 1, got {other}"
            ))),
        }
    }

    pub fn is_abnormal(self) -> bool {
        matches!(self, BagLabel::Abnormal)
    }
}

/// One video: segment features plus labels.
#[derive(Debug, Clone)]
pub struct Bag {
    pub id: String,
    /// Segment-by-feature matrix, one row per segment.
    pub features: DMatrix<f64>,
    pub label: BagLabel,
    /// Per-segment ground truth, when known (`true` marks an anomalous segment).
    pub segment_labels: Option<Vec<bool>>,
}

impl Bag {
    /// Builds a bag, enforcing shape, finiteness, and label consistency.
    pub fn new(
        id: impl Into<String>,
        features: DMatrix<f64>,
        label: BagLabel,
        segment_labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Validation("bag id must be non-empty".into()));
        }
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Validation(format!(
                "bag '{id}' must have at least one segment and one feature dimension"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "bag '{id}' contains non-finite feature values"
            )));
        }
        if let Some(labels) = &segment_labels {
            if labels.len() != features.nrows() {
                return Err(Error::Validation(format!(
                    "bag '{id}' has {} segment labels for {} segments",
                    labels.len(),
                    features.nrows()
                )));
            }
            if label == BagLabel::Normal && labels.iter().any(|&l| l) {
                return Err(Error::Validation(format!(
                    "bag '{id}' is labeled normal but has an anomalous segment label"
                )));
            }
        }
        Ok(Bag {
            id,
            features,
            label,
            segment_labels,
        })
    }

    /// Number of segments.
    pub fn n_segments(&self) -> usize {
        self.features.nrows()
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// A named collection of bags with a common feature dimensionality.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub bags: Vec<Bag>,
}

impl Dataset {
    /// Builds a dataset, enforcing unique ids and a shared feature dimension.
    pub fn new(name: impl Into<String>, bags: Vec<Bag>) -> Result<Self> {
        let name = name.into();
        if bags.is_empty() {
            return Err(Error::Validation("dataset must contain at least one bag".into()));
        }
        let mut seen = HashSet::new();
        for bag in &bags {
            if !seen.insert(bag.id.as_str()) {
                return Err(Error::Validation(format!("duplicate bag id '{}'", bag.id)));
            }
        }
        let dim = bags[0].dim();
        for bag in &bags[1..] {
            if bag.dim() != dim {
                return Err(Error::Validation(format!(
                    "bag '{}' has dimension {} but bag '{}' has dimension {}",
                    bags[0].id,
                    dim,
                    bag.id,
                    bag.dim()
                )));
            }
        }
        Ok(Dataset { name, bags })
    }

    /// Shared feature dimensionality.
    pub fn dim(&self) -> usize {
        self.bags[0].dim()
    }

    /// Bags labeled abnormal.
    pub fn abnormal_bags(&self) -> impl Iterator<Item = &Bag> {
        self.bags.iter().filter(|b| b.label.is_abnormal())
    }

    /// Bags labeled normal.
    pub fn normal_bags(&self) -> impl Iterator<Item = &Bag> {
        self.bags.iter().filter(|b| !b.label.is_abnormal())
    }
}

/// Contiguous clip index ranges backing each pooled segment.
///
/// With at least as many clips as segments the clips are split into
/// contiguous groups whose sizes differ by at most one (earlier groups take
/// the remainder). With fewer clips than segments each clip becomes its own
/// segment and the final clip is repeated to fill the tail.
pub(crate) fn segment_groups(n_clips: usize, n_segments: usize) -> Vec<(usize, usize)> {
    let mut groups = Vec::with_capacity(n_segments);
    if n_clips >= n_segments {
        let base = n_clips / n_segments;
        let remainder = n_clips % n_segments;
        let mut start = 0;
        for g in 0..n_segments {
            let len = base + usize::from(g < remainder);
            groups.push((start, start + len));
            start += len;
        }
    } else {
        for g in 0..n_segments {
            let clip = g.min(n_clips - 1);
            groups.push((clip, clip + 1));
        }
    }
    groups
}

/// Pools a clip-level feature matrix into `n_segments` temporal segments.
///
/// Each output row is the mean of one contiguous clip group as produced by
/// [`segment_groups`].
pub fn segment_video(clips: &DMatrix<f64>, n_segments: usize) -> Result<DMatrix<f64>> {
    if clips.nrows() == 0 || clips.ncols() == 0 {
        return Err(Error::Argument(
            "clip matrix must have at least one row and one column".into(),
        ));
    }
    if n_segments == 0 {
        return Err(Error::Argument("n_segments must be at least 1".into()));
    }
    let dim = clips.ncols();
    let mut out = DMatrix::zeros(n_segments, dim);
    for (g, (start, end)) in segment_groups(clips.nrows(), n_segments).into_iter().enumerate() {
        let len = (end - start) as f64;
        for col in 0..dim {
            let sum: f64 = (start..end).map(|r| clips[(r, col)]).sum();
            out[(g, col)] = sum / len;
        }
    }
    Ok(out)
}

/// Pools clip-level binary labels alongside [`segment_video`]: a segment is
/// anomalous when any clip in its group is.
pub fn segment_labels(clip_labels: &[bool], n_segments: usize) -> Result<Vec<bool>> {
    if clip_labels.is_empty() {
        return Err(Error::Argument("clip label vector must be non-empty".into()));
    }
    if n_segments == 0 {
        return Err(Error::Argument("n_segments must be at least 1".into()));
    }
    Ok(segment_groups(clip_labels.len(), n_segments)
        .into_iter()
        .map(|(start, end)| clip_labels[start..end].iter().any(|&l| l))
        .collect())
}

/// Writes a feature matrix in the binary segment-feature format.
pub fn write_feature_file(features: &DMatrix<f64>, path: &Path) -> Result<()> {
    if features.nrows() == 0 || features.ncols() == 0 {
        return Err(Error::Format(
            "feature matrix must have at least one row and one column".into(),
        ));
    }
    let n = u32::try_from(features.nrows())
        .map_err(|_| Error::Argument("segment count exceeds u32 range".into()))?;
    let dim = u32::try_from(features.ncols())
        .map_err(|_| Error::Argument("feature dimension exceeds u32 range".into()))?;
    let mut buf = Vec::with_capacity(16 + features.len() * 4);
    buf.extend_from_slice(&FEATURE_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    for row in 0..features.nrows() {
        for col in 0..features.ncols() {
            buf.extend_from_slice(&(features[(row, col)] as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a feature matrix from the binary segment-feature format.
pub fn read_feature_file(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let display = path.display();
    if bytes.len() < 16 {
        return Err(Error::Format(format!(
            "{display}: expected at least 16 header bytes, got {}",
            bytes.len()
        )));
    }
    if bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::Format(format!(
            "{display}: bad magic {:02x?}, expected {:02x?}",
            &bytes[0..4],
            FEATURE_MAGIC
        )));
    }
    let read_u32 = |offset: usize| u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
    let version = read_u32(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{display}: unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let n = read_u32(8) as usize;
    let dim = read_u32(12) as usize;
    if n == 0 || dim == 0 {
        return Err(Error::Format(format!(
            "{display}: segment count and dimension must be at least 1, got {n}x{dim}"
        )));
    }
    let expected = 16 + n * dim * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{display}: expected {expected} bytes for {n}x{dim} features, got {}",
            bytes.len()
        )));
    }
    let mut features = DMatrix::zeros(n, dim);
    for row in 0..n {
        for col in 0..dim {
            let offset = 16 + (row * dim + col) * 4;
            let value = f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
            features[(row, col)] = f64::from(value);
        }
    }
    Ok(features)
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    videos: Vec<ManifestVideo>,
}

#[derive(Serialize, Deserialize)]
struct ManifestVideo {
    id: String,
    feature_file: String,
    bag_label: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    segment_labels: Option<Vec<u8>>,
}

/// Loads a dataset from a JSON manifest.
///
/// Feature file paths are resolved relative to the manifest's directory. The
/// dataset takes its name from that directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: ManifestFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported manifest version {}, expected {FORMAT_VERSION}",
            manifest_path.display(),
            manifest.version
        )));
    }
    if manifest.videos.is_empty() {
        return Err(Error::Format(format!(
            "{}: manifest lists no videos",
            manifest_path.display()
        )));
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let name = base
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let mut bags = Vec::with_capacity(manifest.videos.len());
    for video in manifest.videos {
        let features = read_feature_file(&base.join(&video.feature_file))?;
        let label = BagLabel::from_u8(video.bag_label)?;
        let segment_labels = video
            .segment_labels
            .map(|raw| {
                raw.into_iter()
                    .map(|v| match v {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(Error::Format(format!(
                            "bag '{}': segment label must be 0 or 1, got {other}",
                            video.id
                        ))),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .transpose()?;
        bags.push(Bag::new(video.id, features, label, segment_labels)?);
    }
    Dataset::new(name, bags)
}

/// Writes a dataset as `manifest.json` plus one feature file per bag under
/// `dir/features/`, returning the manifest path.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let feature_dir = dir.join("features");
    fs::create_dir_all(&feature_dir).map_err(|e| Error::io(&feature_dir, e))?;
    let mut used = HashSet::new();
    let mut videos = Vec::with_capacity(dataset.bags.len());
    for (idx, bag) in dataset.bags.iter().enumerate() {
        let mut stem: String = bag
            .id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        if !used.insert(stem.clone()) {
            stem = format!("{stem}_{idx}");
            used.insert(stem.clone());
        }
        let relative = format!("features/{stem}.bsvp");
        write_feature_file(&bag.features, &dir.join(&relative))?;
        videos.push(ManifestVideo {
            id: bag.id.clone(),
            feature_file: relative,
            bag_label: bag.label.as_u8(),
            segment_labels: bag
                .segment_labels
                .as_ref()
                .map(|ls| ls.iter().map(|&l| u8::from(l)).collect()),
        });
    }
    let manifest = ManifestFile {
        version: FORMAT_VERSION,
        videos,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest serialization failed: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Converts a matrix to row-major nested vectors (for JSON and bindings).
pub fn matrix_to_rows(matrix: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..matrix.nrows())
        .map(|r| matrix.row(r).iter().copied().collect())
        .collect()
}

/// Builds a matrix from row-major nested vectors, checking rectangularity.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Argument(
            "matrix must have at least one row and one column".into(),
        ));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Argument("matrix rows must all have the same length".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]))
}
