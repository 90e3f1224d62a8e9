//! Commands that work on files rather than a live pipeline.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use trainer_core::marker_tracking::{detect_markers, AugmentSpec, ColorBlobConfig};
use trainer_core::pose_calibration::CalibrationProfile;
use trainer_core::raster::load_png;
use trainer_core::session_io::SessionReader;
use trainer_core::tongue_contour::{extract_contour, write_contours_csv, ContourRecord, ExtractionMethod, IntensityProvider, SegmentationProvider};
use trainer_core::{Point2, Rect, StreamId};

/// Reads augmentation specs from a JSON array or from JSON lines.
pub fn read_augment_specs(path: &Path) -> anyhow::Result<Vec<AugmentSpec>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

/// Builds a calibration profile from the marker pair visible in one frame.
pub fn calibrate_from_frame(
    png: &Path,
    detector: &ColorBlobConfig,
    anchor_offset: Point2,
    us_crop: Rect,
) -> anyhow::Result<CalibrationProfile> {
    let frame = load_png(png, StreamId::Rgb, 0)?;
    let kp = detect_markers(&frame, detector).with_context(|| format!("no marker pair in {}", png.display()))?;
    Ok(CalibrationProfile::from_current_markers(&kp, anchor_offset, us_crop)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub frames: usize,
    pub empty: usize,
    pub csv: PathBuf,
    pub jsonl: PathBuf,
}

/// Re-extracts contours from a session's recorded ultrasound frames, using
/// the crop stored with the session when there is one. Writes
/// `contours.csv` and `contours.jsonl` into `out_dir`.
pub fn extract_session_contours(
    session: &Path,
    out_dir: &Path,
    method: ExtractionMethod,
    threshold: f32,
    max_gap: usize,
) -> anyhow::Result<ExtractSummary> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        bail!("threshold must lie in (0, 1], got {threshold}");
    }
    let reader = SessionReader::open(session)?;
    let crop = reader.manifest().calibration.as_ref().map(|c| c.us_crop);
    let frames = reader.read_frames(StreamId::Us)?;
    let mut records = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let gray = f.to_gray();
        let crop = crop.unwrap_or(Rect::new(0, 0, gray.width(), gray.height()));
        let c = gray.crop(crop.x, crop.y, crop.width, crop.height);
        let map = IntensityProvider.segment(&c);
        records.push(ContourRecord {
            frame_index: i as u64,
            bundle_ts_us: f.timestamp_us,
            contour: extract_contour(&map, method, threshold, max_gap),
        });
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let csv = out_dir.join("contours.csv");
    write_contours_csv(BufWriter::new(File::create(&csv)?), &records)?;
    let jsonl = out_dir.join("contours.jsonl");
    let mut w = BufWriter::new(File::create(&jsonl)?);
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(ExtractSummary {
        frames: records.len(),
        empty: records.iter().filter(|r| r.contour.is_empty()).count(),
        csv,
        jsonl,
    })
}
