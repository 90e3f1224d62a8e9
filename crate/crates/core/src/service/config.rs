use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::compositor::{BlendWeights, CompositeStyle};
use crate::geometry::{Point2, Rect};
use crate::marker_tracking::ColorBlobConfig;
use crate::session_io::RecordOutput;
use crate::stream_sync::{SourceSpec, SyntheticParams, DEFAULT_QUEUE_CAPACITY, DEFAULT_STALL_TIMEOUT_US, DEFAULT_TOLERANCE_US};
use crate::tongue_contour::{ExtractionMethod, DEFAULT_MAX_GAP, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourcesConfig {
    pub rgb: SourceSpec,
    pub us: SourceSpec,
    pub audio: Option<SourceSpec>,
    /// Second ultrasound device, paired best-effort.
    pub reference: Option<SourceSpec>,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        Self {
            rgb: SourceSpec::Synthetic(SyntheticParams::default()),
            us: SourceSpec::Synthetic(SyntheticParams::default()),
            audio: None,
            reference: None,
        }
    }
}

/// Used when no calibration file is given: the first detected marker pair
/// becomes the reference pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoCalibration {
    pub anchor_offset: Point2,
    /// Defaults to the whole ultrasound frame.
    pub us_crop: Option<Rect>,
}

impl Default for AutoCalibration {
    fn default() -> Self {
        Self {
            anchor_offset: Point2::new(0.5, -1.0),
            us_crop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub backend: String,
    pub color_blob: ColorBlobConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            backend: "color_blob".into(),
            color_blob: ColorBlobConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub provider: String,
    pub method: ExtractionMethod,
    pub threshold: f32,
    pub max_gap: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            provider: "intensity".into(),
            method: ExtractionMethod::Top,
            threshold: DEFAULT_THRESHOLD,
            max_gap: DEFAULT_MAX_GAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncSettings {
    pub tolerance_us: u64,
    pub stall_timeout_us: u64,
    pub queue_capacity: usize,
}

impl Default for SyncSettings {
    fn default() -> Self {
        Self {
            tolerance_us: DEFAULT_TOLERANCE_US,
            stall_timeout_us: DEFAULT_STALL_TIMEOUT_US,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordSettings {
    /// Record from startup into this directory.
    pub dir: Option<PathBuf>,
    /// Parent for sessions started with `start_record` without a directory.
    pub root: Option<PathBuf>,
    pub outputs: BTreeSet<RecordOutput>,
    pub session_id: Option<String>,
    pub created_at: Option<String>,
}

impl Default for RecordSettings {
    fn default() -> Self {
        Self {
            dir: None,
            root: None,
            outputs: RecordOutput::all(),
            session_id: None,
            created_at: None,
        }
    }
}

/// Everything needed to start a pipeline. Read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sources: SourcesConfig,
    pub calibration: Option<PathBuf>,
    pub auto_calibration: AutoCalibration,
    pub weights: BlendWeights,
    pub style: CompositeStyle,
    pub guideline: bool,
    pub detector: DetectorConfig,
    pub segmentation: SegmentationConfig,
    pub sync: SyncSettings,
    pub record: RecordSettings,
    /// Directory that reference session ids are resolved against.
    pub reference_root: Option<PathBuf>,
    /// Reference session selected at startup.
    pub reference_session: Option<PathBuf>,
    /// Per-subscriber queue length before the oldest item is dropped.
    pub publish_queue: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sources: SourcesConfig::default(),
            calibration: None,
            auto_calibration: AutoCalibration::default(),
            weights: BlendWeights::default(),
            style: CompositeStyle::default(),
            guideline: true,
            detector: DetectorConfig::default(),
            segmentation: SegmentationConfig::default(),
            sync: SyncSettings::default(),
            record: RecordSettings::default(),
            reference_root: None,
            reference_session: None,
            publish_queue: 4,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::ConfigInvalid(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for spec in [Some(&mut cfg.sources.rgb), Some(&mut cfg.sources.us), cfg.sources.audio.as_mut(), cfg.sources.reference.as_mut()]
            .into_iter()
            .flatten()
        {
            if let SourceSpec::Replay(dir) = spec {
                resolve(base, dir);
            }
        }
        for p in [
            cfg.calibration.as_mut(),
            cfg.record.dir.as_mut(),
            cfg.record.root.as_mut(),
            cfg.reference_root.as_mut(),
            cfg.reference_session.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::ConfigInvalid(m));
        if let Err(e) = self.weights.validate() {
            return bad(e.to_string());
        }
        if let Some(p) = &self.calibration {
            if !p.is_file() {
                return bad(format!("calibration file {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.reference_session {
            if !p.is_dir() {
                return bad(format!("reference session {} does not exist", p.display()));
            }
        }
        if self.detector.backend != "color_blob" {
            return bad(format!("unknown detector backend {:?}", self.detector.backend));
        }
        if self.segmentation.provider != "intensity" {
            return bad(format!("unknown segmentation provider {:?}", self.segmentation.provider));
        }
        if !(self.segmentation.threshold > 0.0 && self.segmentation.threshold <= 1.0) {
            return bad(format!("threshold must lie in (0, 1], got {}", self.segmentation.threshold));
        }
        if self.sync.tolerance_us == 0 || self.sync.stall_timeout_us == 0 || self.sync.queue_capacity == 0 {
            return bad("tolerance, stall timeout and queue capacity must be positive".into());
        }
        if self.publish_queue == 0 {
            return bad("publish_queue must be positive".into());
        }
        if self.record.outputs.is_empty() {
            return bad("record.outputs is empty".into());
        }
        Ok(())
    }

    /// Copy stored in recorded manifests. The record location is left out so
    /// identical runs into different directories stay byte-identical.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.record.dir = None;
        c.record.root = None;
        serde_json::to_value(c).expect("config serializes")
    }
}
