//! Keypoint datasets on disk: a directory of PNG images plus `labels.jsonl`
//! holding one `{"file", "m1", "m2"}` record per image.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{augment, AugmentSpec, KeypointPair, KeypointSample, TrackingError};
use crate::frame::StreamId;
use crate::geometry::Point2;
use crate::raster::{load_png, save_png, PngError};

pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub file: String,
    pub m1: Point2,
    pub m2: Point2,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {source}")]
    Label {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: PngError },
    #[error("{file}: {source}")]
    Sample { file: String, source: TrackingError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_samples(dir: &Path) -> Result<Vec<(String, KeypointSample)>, DatasetError> {
    let labels = dir.join(LABELS_FILE);
    let reader = BufReader::new(File::open(&labels).map_err(io_err(&labels))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(&labels))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|source| DatasetError::Label {
            path: labels.clone(),
            line: i + 1,
            source,
        })?;
        let path = dir.join(&rec.file);
        let image = load_png(&path, StreamId::Rgb, 0).map_err(|source| DatasetError::Image { path, source })?;
        let sample = KeypointSample::new(image, KeypointPair::new(rec.m1, rec.m2, 1.0))
            .map_err(|source| DatasetError::Sample {
                file: rec.file.clone(),
                source,
            })?;
        out.push((rec.file, sample));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AugmentSummary {
    pub written: usize,
    /// Sample/spec combinations skipped because a keypoint left the frame.
    pub rejected: usize,
}

/// Applies every spec to every sample, writing `<stem>_aug<k>.png` files and
/// a fresh `labels.jsonl` into `out_dir`.
pub fn augment_dataset(in_dir: &Path, out_dir: &Path, specs: &[AugmentSpec]) -> Result<AugmentSummary, DatasetError> {
    let samples = load_samples(in_dir)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let labels_path = out_dir.join(LABELS_FILE);
    let mut labels = BufWriter::new(File::create(&labels_path).map_err(io_err(&labels_path))?);
    let mut summary = AugmentSummary::default();

    for (file, sample) in &samples {
        let stem = Path::new(file)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.clone());
        for (k, spec) in specs.iter().enumerate() {
            let out = match augment(sample, spec) {
                Ok(out) => out,
                Err(TrackingError::KeypointOutOfBounds { .. }) => {
                    summary.rejected += 1;
                    continue;
                }
                Err(source) => {
                    return Err(DatasetError::Sample {
                        file: file.clone(),
                        source,
                    })
                }
            };
            let name = format!("{stem}_aug{k}.png");
            let path = out_dir.join(&name);
            save_png(&out.image, &path).map_err(|source| DatasetError::Image { path, source })?;
            let rec = LabelRecord {
                file: name,
                m1: out.truth.m1,
                m2: out.truth.m2,
            };
            let line = serde_json::to_string(&rec).expect("labels serialize");
            writeln!(labels, "{line}").map_err(io_err(&labels_path))?;
            summary.written += 1;
        }
    }
    labels.flush().map_err(io_err(&labels_path))?;
    Ok(summary)
}
