//! Frame sources and the pairing of camera, ultrasound and audio streams
//! into time-aligned bundles. The camera stream is the master clock.

mod pairer;
mod scene;
mod source;
mod threaded;

pub use pairer::{pair_streams, PairEvent, Pairer, PairerConfig, SyncedBundle};
pub use scene::{SyntheticAudio, SyntheticCamera, SyntheticParams, SyntheticUltrasound};
pub use source::{make_audio_source, make_source, AudioSource, FrameSource, SourcePoll, SourceSpec, StubHub, StubSource};
pub use threaded::{spawn_audio, spawn_frames, QueuePolicy, Received, SourceHandle};

use std::path::PathBuf;

use crate::frame::StreamId;

pub const DEFAULT_TOLERANCE_US: u64 = 16_667;
pub const DEFAULT_STALL_TIMEOUT_US: u64 = 500_000;
pub const DEFAULT_QUEUE_CAPACITY: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum SyncError {
    #[error("no recorded session at {0}")]
    SessionNotFound(PathBuf),
    #[error("invalid source config: {0}")]
    ConfigInvalid(String),
    #[error("{stream} source produced nothing for {silent_us} us")]
    SourceStalled { stream: StreamId, silent_us: u64 },
    #[error("{stream} source failed: {detail}")]
    SourceFailed { stream: StreamId, detail: String },
}
