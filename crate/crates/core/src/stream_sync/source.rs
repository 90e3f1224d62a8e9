use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};
use serde::{Deserialize, Serialize};

use super::scene::{SyntheticAudio, SyntheticCamera, SyntheticParams, SyntheticUltrasound};
use super::SyncError;
use crate::frame::{AudioChunk, ImageFrame, StreamId};
use crate::session_io::{SessionError, SessionReader};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourcePoll<T> {
    Ready(T),
    /// Nothing available yet; poll again later.
    Pending,
    Ended,
}

/// Pull interface over one image stream. Timestamps must increase.
pub trait FrameSource: Send {
    fn stream_id(&self) -> StreamId;
    fn poll_frame(&mut self) -> Result<SourcePoll<ImageFrame>, SyncError>;
    /// Lossless sources are never dropped from and may be waited on
    /// indefinitely; live sources are not.
    fn lossless(&self) -> bool;
}

pub trait AudioSource: Send {
    fn poll_chunk(&mut self) -> Result<SourcePoll<AudioChunk>, SyncError>;
    fn lossless(&self) -> bool;
}

/// `synthetic:<key=val,...>`, `replay:<dir>` or `stub:<id>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SourceSpec {
    Synthetic(SyntheticParams),
    Replay(PathBuf),
    Stub(String),
}

impl FromStr for SourceSpec {
    type Err = SyncError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "synthetic" => Ok(SourceSpec::Synthetic(rest.parse()?)),
            "replay" if !rest.is_empty() => Ok(SourceSpec::Replay(PathBuf::from(rest))),
            "stub" if !rest.is_empty() => Ok(SourceSpec::Stub(rest.to_string())),
            _ => Err(SyncError::ConfigInvalid(format!(
                "source spec {s:?} is not synthetic:<params>, replay:<dir> or stub:<id>"
            ))),
        }
    }
}

impl TryFrom<String> for SourceSpec {
    type Error = SyncError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SourceSpec> for String {
    fn from(s: SourceSpec) -> String {
        s.to_string()
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Synthetic(p) => write!(f, "synthetic:{p}"),
            SourceSpec::Replay(dir) => write!(f, "replay:{}", dir.display()),
            SourceSpec::Stub(id) => write!(f, "stub:{id}"),
        }
    }
}

/// Registry of live-stub inputs. Network clients push frames by stub id.
#[derive(Debug, Clone, Default)]
pub struct StubHub {
    inner: Arc<Mutex<HashMap<String, Sender<ImageFrame>>>>,
}

impl StubHub {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates (or replaces) the stub with this id.
    pub fn open(&self, id: &str, stream_id: StreamId) -> StubSource {
        let (tx, rx) = crossbeam_channel::unbounded();
        self.inner.lock().unwrap().insert(id.to_string(), tx);
        StubSource {
            stream_id,
            rx,
            last_ts: None,
        }
    }

    /// Hands a frame to the stub; false when no such stub is open.
    pub fn push(&self, id: &str, frame: ImageFrame) -> bool {
        let map = self.inner.lock().unwrap();
        map.get(id).is_some_and(|tx| tx.send(frame).is_ok())
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.lock().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// Frames pushed from outside the process. Non-increasing timestamps are
/// discarded to keep the stream monotone.
pub struct StubSource {
    stream_id: StreamId,
    rx: Receiver<ImageFrame>,
    last_ts: Option<u64>,
}

impl FrameSource for StubSource {
    fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    fn poll_frame(&mut self) -> Result<SourcePoll<ImageFrame>, SyncError> {
        loop {
            match self.rx.recv_timeout(Duration::from_millis(5)) {
                Ok(f) if self.last_ts.is_some_and(|t| f.timestamp_us <= t) => continue,
                Ok(f) => {
                    self.last_ts = Some(f.timestamp_us);
                    return Ok(SourcePoll::Ready(f.with_stream(self.stream_id)));
                }
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => return Ok(SourcePoll::Pending),
                Err(crossbeam_channel::RecvTimeoutError::Disconnected) => return Ok(SourcePoll::Ended),
            }
        }
    }

    fn lossless(&self) -> bool {
        false
    }
}

fn session_error(stream: StreamId, e: SessionError) -> SyncError {
    match e {
        SessionError::SessionNotFound(p) => SyncError::SessionNotFound(p),
        other => SyncError::SourceFailed {
            stream,
            detail: other.to_string(),
        },
    }
}

/// Builds the source for `stream`. Synthetic sources render content that
/// fits the stream: a face with markers for RGB, a tongue band otherwise.
pub fn make_source(spec: &SourceSpec, stream: StreamId, stubs: &StubHub) -> Result<Box<dyn FrameSource>, SyncError> {
    match spec {
        SourceSpec::Synthetic(p) => Ok(match stream {
            StreamId::Rgb | StreamId::Composite => Box::new(SyntheticCamera::new(p.clone(), stream)),
            _ => Box::new(SyntheticUltrasound::new(p.clone(), stream)),
        }),
        SourceSpec::Replay(dir) => {
            let reader = SessionReader::open(dir).map_err(|e| session_error(stream, e))?;
            let src = reader.frame_source(stream).map_err(|e| session_error(stream, e))?;
            Ok(Box::new(src))
        }
        SourceSpec::Stub(id) => Ok(Box::new(stubs.open(id, stream))),
    }
}

pub fn make_audio_source(spec: &SourceSpec) -> Result<Box<dyn AudioSource>, SyncError> {
    match spec {
        SourceSpec::Synthetic(p) => Ok(Box::new(SyntheticAudio::new(p.clone()))),
        SourceSpec::Replay(dir) => {
            let reader = SessionReader::open(dir).map_err(|e| session_error(StreamId::Rgb, e))?;
            Ok(Box::new(reader.audio_source().map_err(|e| session_error(StreamId::Rgb, e))?))
        }
        SourceSpec::Stub(_) => Err(SyncError::ConfigInvalid("audio has no live stub".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::PixelFormat;
    use crate::geometry::FrameDims;

    #[test]
    fn spec_strings_round_trip() {
        for s in ["synthetic:seed=7,fps=30,frames=10", "synthetic:seed=1,shift_y=5", "replay:/tmp/session", "stub:probe"] {
            let spec: SourceSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<SourceSpec>().unwrap(), spec);
        }
        assert!("webcam:0".parse::<SourceSpec>().is_err());
        assert!("replay:".parse::<SourceSpec>().is_err());
        assert!("synthetic:fps=0".parse::<SourceSpec>().is_err());
    }

    #[test]
    fn unknown_session_is_reported() {
        let spec = SourceSpec::Replay(PathBuf::from("/nonexistent/session"));
        assert!(matches!(
            make_source(&spec, StreamId::Us, &StubHub::new()),
            Err(SyncError::SessionNotFound(_))
        ));
    }

    #[test]
    fn stub_drops_non_monotone_frames() {
        let hub = StubHub::new();
        let mut src = make_source(&SourceSpec::Stub("probe".into()), StreamId::Us, &hub).unwrap();
        let f = |t| ImageFrame::filled(StreamId::Rgb, t, FrameDims::new(2, 2), PixelFormat::Gray8, 0);
        assert!(hub.push("probe", f(10)));
        assert!(hub.push("probe", f(5)));
        assert!(hub.push("probe", f(20)));
        assert!(!hub.push("other", f(30)));
        let mut got = Vec::new();
        while let SourcePoll::Ready(fr) = src.poll_frame().unwrap() {
            assert_eq!(fr.stream_id, StreamId::Us);
            got.push(fr.timestamp_us);
        }
        assert_eq!(got, vec![10, 20]);
    }
}
