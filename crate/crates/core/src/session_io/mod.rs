//! Recorded sessions on disk.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/<stream>/<ordinal:06>.png
//! <dir>/audio.wav          mono PCM16
//! <dir>/contours.jsonl     one ContourRecord per line
//! ```
//!
//! Timestamps live only in the manifest. Every file carries a CRC32 there.

mod reader;
mod recorder;

pub use reader::{ReplayAudio, ReplaySource, SessionReader, VerifyReport};
pub use recorder::{record_bundles, Recorder, RecorderOptions};

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::frame::{PixelFormat, StreamId};
use crate::pose_calibration::CalibrationProfile;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const AUDIO_FILE: &str = "audio.wav";
pub const CONTOURS_FILE: &str = "contours.jsonl";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("no recorded session at {0}")]
    SessionNotFound(PathBuf),
    #[error("cannot write session directory {dir}: {detail}")]
    DirNotWritable { dir: PathBuf, detail: String },
    #[error("disk full while writing {0}")]
    DiskFull(PathBuf),
    #[error("session corrupt in {stream}: {detail}")]
    ManifestCorrupt { stream: String, detail: String },
    #[error("stream {0} was not recorded")]
    StreamNotRecorded(StreamId),
    #[error("{stream} frame {ordinal} does not match the stream's dims or format")]
    InconsistentFrame { stream: StreamId, ordinal: u64 },
    #[error("nothing selected for recording")]
    NoOutputs,
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl SessionError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        // ENOSPC
        if source.raw_os_error() == Some(28) {
            SessionError::DiskFull(path)
        } else {
            SessionError::Io { path, source }
        }
    }

    pub(crate) fn corrupt(stream: impl ToString, detail: impl ToString) -> Self {
        SessionError::ManifestCorrupt {
            stream: stream.to_string(),
            detail: detail.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordOutput {
    Rgb,
    Us,
    Pred,
    Composite,
    Contours,
    Audio,
}

impl RecordOutput {
    pub const ALL: [RecordOutput; 6] = [
        RecordOutput::Rgb,
        RecordOutput::Us,
        RecordOutput::Pred,
        RecordOutput::Composite,
        RecordOutput::Contours,
        RecordOutput::Audio,
    ];

    pub fn all() -> BTreeSet<RecordOutput> {
        Self::ALL.into_iter().collect()
    }

    pub fn for_stream(stream: StreamId) -> Option<RecordOutput> {
        match stream {
            StreamId::Rgb => Some(RecordOutput::Rgb),
            StreamId::Us => Some(RecordOutput::Us),
            StreamId::Pred => Some(RecordOutput::Pred),
            StreamId::Composite => Some(RecordOutput::Composite),
            StreamId::Ref => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub ordinal: u64,
    pub timestamp_us: u64,
    /// Path relative to the session directory.
    pub file: String,
    pub bytes: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub id: StreamId,
    /// Absent while the stream has no frames.
    pub pixel_format: Option<PixelFormat>,
    pub width: u32,
    pub height: u32,
    pub frame_count: u64,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioChunkEntry {
    pub timestamp_us: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioEntry {
    pub file: String,
    pub sample_rate_hz: u32,
    pub sample_count: u64,
    pub bytes: u64,
    pub crc32: u32,
    /// Chunk boundaries, so replay reproduces the recorded chunking.
    pub chunks: Vec<AudioChunkEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContoursEntry {
    pub file: String,
    pub records: u64,
    pub bytes: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub format_version: u32,
    pub session_id: String,
    pub created_at: String,
    pub streams: Vec<StreamEntry>,
    pub audio: Option<AudioEntry>,
    pub contours: Option<ContoursEntry>,
    pub calibration: Option<CalibrationProfile>,
    pub config: Option<serde_json::Value>,
}

impl SessionManifest {
    pub fn stream(&self, id: StreamId) -> Option<&StreamEntry> {
        self.streams.iter().find(|s| s.id == id)
    }
}
