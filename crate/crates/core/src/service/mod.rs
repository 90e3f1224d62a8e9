//! The running pipeline: sources, pairing, per-bundle processing,
//! publication to clients and recording, driven by control messages.

mod config;
mod pipeline;
mod processing;
pub mod protocol;
mod reference;

pub use config::{
    AutoCalibration, DetectorConfig, PipelineConfig, RecordSettings, SegmentationConfig, SourcesConfig, SyncSettings,
};
pub use pipeline::{run_headless, Pipeline, PipelineHandle, Published, RunSummary, Subscription};
pub use processing::{Processed, Processor, StageLatency};
pub use reference::{compare_with_reference, ReferenceTrack};

use crate::pose_calibration::CalibrationError;
use crate::session_io::SessionError;
use crate::stream_sync::SyncError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("pipeline is not running")]
    Stopped,
}
