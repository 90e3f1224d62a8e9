use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{FrameEntry, SessionError, SessionManifest, StreamEntry, MANIFEST_FILE};
use crate::frame::{AudioChunk, ImageFrame, StreamId};
use crate::raster::decode_png;
use crate::stream_sync::{AudioSource, FrameSource, SourcePoll, SyncError};
use crate::tongue_contour::{read_contours_jsonl, ContourRecord};

/// An opened session directory with a parsed manifest.
#[derive(Debug, Clone)]
pub struct SessionReader {
    dir: PathBuf,
    manifest: SessionManifest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub session_id: String,
    pub frames: Vec<(StreamId, u64)>,
    pub audio_samples: u64,
    pub contour_records: u64,
}

fn read_checked(dir: &Path, rel: &str, bytes: u64, crc32: u32, owner: &str) -> Result<Vec<u8>, SessionError> {
    let data = std::fs::read(dir.join(rel)).map_err(|e| SessionError::corrupt(owner, format!("{rel}: {e}")))?;
    if data.len() as u64 != bytes {
        return Err(SessionError::corrupt(owner, format!("{rel}: {} bytes, manifest says {bytes}", data.len())));
    }
    if crc32fast::hash(&data) != crc32 {
        return Err(SessionError::corrupt(owner, format!("{rel}: checksum mismatch")));
    }
    Ok(data)
}

fn check_size(dir: &Path, rel: &str, bytes: u64, owner: &str) -> Result<(), SessionError> {
    let len = std::fs::metadata(dir.join(rel))
        .map_err(|e| SessionError::corrupt(owner, format!("{rel}: {e}")))?
        .len();
    if len != bytes {
        return Err(SessionError::corrupt(owner, format!("{rel}: {len} bytes, manifest says {bytes}")));
    }
    Ok(())
}

fn decode_entry(dir: &Path, stream: &StreamEntry, e: &FrameEntry) -> Result<ImageFrame, SessionError> {
    let data = read_checked(dir, &e.file, e.bytes, e.crc32, stream.id.as_str())?;
    let frame = decode_png(&data, stream.id, e.timestamp_us)
        .map_err(|err| SessionError::corrupt(stream.id, format!("{}: {err}", e.file)))?;
    if Some(frame.format()) != stream.pixel_format || frame.width() != stream.width || frame.height() != stream.height {
        return Err(SessionError::corrupt(stream.id, format!("{}: dims or format differ from the manifest", e.file)));
    }
    Ok(frame)
}

impl SessionReader {
    /// Parses the manifest and checks that every listed file exists with
    /// the recorded size. Checksums are verified as files are read.
    pub fn open(dir: &Path) -> Result<Self, SessionError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(SessionError::SessionNotFound(dir.to_path_buf()));
        }
        let raw = std::fs::read(&path).map_err(|e| SessionError::io(&path, e))?;
        let manifest: SessionManifest =
            serde_json::from_slice(&raw).map_err(|e| SessionError::corrupt("manifest", e))?;
        for s in &manifest.streams {
            if s.frame_count != s.frames.len() as u64 {
                return Err(SessionError::corrupt(s.id, "frame_count disagrees with the frame table"));
            }
            for e in &s.frames {
                check_size(dir, &e.file, e.bytes, s.id.as_str())?;
            }
        }
        if let Some(a) = &manifest.audio {
            check_size(dir, &a.file, a.bytes, "audio")?;
        }
        if let Some(c) = &manifest.contours {
            check_size(dir, &c.file, c.bytes, "contours")?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &SessionManifest {
        &self.manifest
    }

    fn stream(&self, id: StreamId) -> Result<&StreamEntry, SessionError> {
        self.manifest.stream(id).ok_or(SessionError::StreamNotRecorded(id))
    }

    pub fn frame_source(&self, id: StreamId) -> Result<ReplaySource, SessionError> {
        Ok(ReplaySource {
            dir: self.dir.clone(),
            stream: self.stream(id)?.clone(),
            next: 0,
        })
    }

    pub fn read_frames(&self, id: StreamId) -> Result<Vec<ImageFrame>, SessionError> {
        let s = self.stream(id)?;
        s.frames.iter().map(|e| decode_entry(&self.dir, s, e)).collect()
    }

    /// Recorded audio, split back into the recorded chunks.
    pub fn read_audio(&self) -> Result<Vec<AudioChunk>, SessionError> {
        let Some(a) = &self.manifest.audio else {
            return Ok(Vec::new());
        };
        let data = read_checked(&self.dir, &a.file, a.bytes, a.crc32, "audio")?;
        let reader = hound::WavReader::new(BufReader::new(data.as_slice())).map_err(|e| SessionError::corrupt("audio", e))?;
        let samples: Vec<i16> = reader
            .into_samples::<i16>()
            .collect::<Result<_, _>>()
            .map_err(|e| SessionError::corrupt("audio", e))?;
        let listed: u64 = a.chunks.iter().map(|c| c.samples).sum();
        if samples.len() as u64 != a.sample_count || listed != a.sample_count {
            return Err(SessionError::corrupt("audio", "sample count disagrees with the manifest"));
        }
        let mut at = 0usize;
        Ok(a.chunks
            .iter()
            .map(|c| {
                let end = at + c.samples as usize;
                let chunk = AudioChunk::new(c.timestamp_us, a.sample_rate_hz, &samples[at..end]);
                at = end;
                chunk
            })
            .collect())
    }

    pub fn audio_source(&self) -> Result<ReplayAudio, SessionError> {
        Ok(ReplayAudio {
            chunks: self.read_audio()?.into_iter(),
        })
    }

    pub fn read_contours(&self) -> Result<Vec<ContourRecord>, SessionError> {
        let Some(c) = &self.manifest.contours else {
            return Ok(Vec::new());
        };
        let data = read_checked(&self.dir, &c.file, c.bytes, c.crc32, "contours")?;
        let records = read_contours_jsonl(data.as_slice()).map_err(|e| SessionError::corrupt("contours", e))?;
        if records.len() as u64 != c.records {
            return Err(SessionError::corrupt("contours", "record count disagrees with the manifest"));
        }
        Ok(records)
    }

    /// Full integrity check: checksums, decodability, dims, timestamp order
    /// and that the frame files on disk are exactly those in the manifest.
    pub fn verify(&self) -> Result<VerifyReport, SessionError> {
        let mut frames = Vec::new();
        for s in &self.manifest.streams {
            let mut last = None;
            for (k, e) in s.frames.iter().enumerate() {
                if e.ordinal != k as u64 {
                    return Err(SessionError::corrupt(s.id, format!("ordinal {} at position {k}", e.ordinal)));
                }
                if last.is_some_and(|t| e.timestamp_us <= t) {
                    return Err(SessionError::corrupt(s.id, format!("timestamp not increasing at ordinal {k}")));
                }
                last = Some(e.timestamp_us);
                decode_entry(&self.dir, s, e)?;
            }
            let sub = self.dir.join(s.id.as_str());
            let on_disk = match std::fs::read_dir(&sub) {
                Ok(rd) => rd
                    .filter_map(Result::ok)
                    .filter(|d| d.path().extension().is_some_and(|x| x == "png"))
                    .count() as u64,
                Err(_) => 0,
            };
            if on_disk != s.frame_count {
                return Err(SessionError::corrupt(
                    s.id,
                    format!("{on_disk} frame files on disk, manifest lists {}", s.frame_count),
                ));
            }
            frames.push((s.id, s.frame_count));
        }
        let audio_samples = self.read_audio()?.iter().map(|c| c.samples.len() as u64).sum();
        let contour_records = self.read_contours()?.len() as u64;
        Ok(VerifyReport {
            session_id: self.manifest.session_id.clone(),
            frames,
            audio_samples,
            contour_records,
        })
    }
}

/// Replays one recorded stream with its recorded timestamps.
pub struct ReplaySource {
    dir: PathBuf,
    stream: StreamEntry,
    next: usize,
}

impl FrameSource for ReplaySource {
    fn stream_id(&self) -> StreamId {
        self.stream.id
    }

    fn poll_frame(&mut self) -> Result<SourcePoll<ImageFrame>, SyncError> {
        let Some(e) = self.stream.frames.get(self.next) else {
            return Ok(SourcePoll::Ended);
        };
        let frame = decode_entry(&self.dir, &self.stream, e).map_err(|err| SyncError::SourceFailed {
            stream: self.stream.id,
            detail: err.to_string(),
        })?;
        self.next += 1;
        Ok(SourcePoll::Ready(frame))
    }

    fn lossless(&self) -> bool {
        true
    }
}

pub struct ReplayAudio {
    chunks: std::vec::IntoIter<AudioChunk>,
}

impl AudioSource for ReplayAudio {
    fn poll_chunk(&mut self) -> Result<SourcePoll<AudioChunk>, SyncError> {
        Ok(match self.chunks.next() {
            Some(c) => SourcePoll::Ready(c),
            None => SourcePoll::Ended,
        })
    }

    fn lossless(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::PixelFormat;
    use crate::geometry::{FrameDims, Point2};
    use crate::session_io::{RecordOutput, Recorder, RecorderOptions};
    use crate::tongue_contour::TongueContour;

    fn frame(stream: StreamId, t: u64, seed: u8) -> ImageFrame {
        let dims = FrameDims::new(6, 4);
        let fmt = if stream == StreamId::Rgb { PixelFormat::Rgb8 } else { PixelFormat::Gray8 };
        let payload: Vec<u8> = (0..dims.pixel_count() * fmt.channels()).map(|i| (i as u8).wrapping_mul(seed)).collect();
        ImageFrame::new(stream, t, 6, 4, fmt, payload).unwrap()
    }

    fn options() -> RecorderOptions {
        RecorderOptions {
            session_id: Some("test".into()),
            created_at: Some("2024-01-01T00:00:00+00:00".into()),
            ..RecorderOptions::default()
        }
    }

    fn record_sample(dir: &Path) -> SessionManifest {
        let mut rec = Recorder::create(dir, options()).unwrap();
        for k in 0..5u64 {
            rec.write_frame(&frame(StreamId::Rgb, k * 100, k as u8 + 1)).unwrap();
            rec.write_frame(&frame(StreamId::Us, k * 100 + 7, k as u8 + 3)).unwrap();
            rec.write_audio(&AudioChunk::new(k * 100, 10_000, vec![k as i16; 1])).unwrap();
            rec.write_contour(&ContourRecord {
                frame_index: k,
                bundle_ts_us: k * 100,
                contour: TongueContour {
                    points: vec![Point2::new(0.0, k as f64), Point2::new(1.0, 0.5)],
                    source_dims: FrameDims::new(6, 4),
                },
            })
            .unwrap();
        }
        // repeated timestamp is skipped
        assert!(!rec.write_frame(&frame(StreamId::Us, 407, 9)).unwrap());
        rec.finish().unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let m = record_sample(tmp.path());
        assert_eq!(m.stream(StreamId::Rgb).unwrap().frame_count, 5);
        assert_eq!(m.stream(StreamId::Pred).unwrap().frame_count, 0);
        let r = SessionReader::open(tmp.path()).unwrap();
        assert_eq!(r.manifest(), &m);
        let rgb = r.read_frames(StreamId::Rgb).unwrap();
        for (k, f) in rgb.iter().enumerate() {
            assert_eq!(f, &frame(StreamId::Rgb, k as u64 * 100, k as u8 + 1));
        }
        let audio = r.read_audio().unwrap();
        assert_eq!(audio.len(), 5);
        assert_eq!(audio[3], AudioChunk::new(300, 10_000, vec![3i16]));
        assert_eq!(r.read_contours().unwrap().len(), 5);
        let report = r.verify().unwrap();
        assert_eq!(report.frames[0], (StreamId::Rgb, 5));
        assert_eq!(report.audio_samples, 5);
    }

    #[test]
    fn empty_session_is_valid() {
        let tmp = tempfile::tempdir().unwrap();
        let m = Recorder::create(tmp.path(), options()).unwrap().finish().unwrap();
        assert!(m.streams.iter().all(|s| s.frame_count == 0));
        let r = SessionReader::open(tmp.path()).unwrap();
        assert!(r.verify().is_ok());
    }

    #[test]
    fn truncated_frame_names_its_stream() {
        let tmp = tempfile::tempdir().unwrap();
        record_sample(tmp.path());
        let victim = tmp.path().join("us/000002.png");
        let len = std::fs::metadata(&victim).unwrap().len();
        let f = std::fs::OpenOptions::new().write(true).open(&victim).unwrap();
        f.set_len(len / 2).unwrap();
        match SessionReader::open(tmp.path()) {
            Err(SessionError::ManifestCorrupt { stream, .. }) => assert_eq!(stream, "us"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flipped_byte_is_caught_on_read() {
        let tmp = tempfile::tempdir().unwrap();
        record_sample(tmp.path());
        let victim = tmp.path().join("rgb/000001.png");
        let mut data = std::fs::read(&victim).unwrap();
        let n = data.len();
        data[n - 20] ^= 0xFF;
        std::fs::write(&victim, data).unwrap();
        let r = SessionReader::open(tmp.path()).unwrap();
        assert!(matches!(r.verify(), Err(SessionError::ManifestCorrupt { ref stream, .. }) if stream == "rgb"));
        let mut src = r.frame_source(StreamId::Rgb).unwrap();
        assert!(matches!(src.poll_frame(), Ok(SourcePoll::Ready(_))));
        assert!(matches!(src.poll_frame(), Err(SyncError::SourceFailed { stream: StreamId::Rgb, .. })));
    }

    #[test]
    fn missing_manifest_and_unwritable_dir() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(SessionReader::open(tmp.path()), Err(SessionError::SessionNotFound(_))));
        let file = tmp.path().join("plain-file");
        std::fs::write(&file, b"x").unwrap();
        assert!(matches!(
            Recorder::create(&file.join("sub"), options()),
            Err(SessionError::DirNotWritable { .. })
        ));
        let only_pred = RecorderOptions {
            outputs: [RecordOutput::Pred].into_iter().collect(),
            ..options()
        };
        let m = Recorder::create(&tmp.path().join("p"), only_pred).unwrap().finish().unwrap();
        assert_eq!(m.streams.len(), 1);
        assert!(m.audio.is_none() && m.contours.is_none());
    }

    #[test]
    fn replay_then_record_reproduces_the_frame_tables() {
        let tmp = tempfile::tempdir().unwrap();
        let first = record_sample(&tmp.path().join("a"));
        let r = SessionReader::open(&tmp.path().join("a")).unwrap();
        let mut rec = Recorder::create(&tmp.path().join("b"), options()).unwrap();
        for id in [StreamId::Rgb, StreamId::Us] {
            let mut src = r.frame_source(id).unwrap();
            while let SourcePoll::Ready(f) = src.poll_frame().unwrap() {
                rec.write_frame(&f).unwrap();
            }
        }
        for c in r.read_audio().unwrap() {
            rec.write_audio(&c).unwrap();
        }
        for c in r.read_contours().unwrap() {
            rec.write_contour(&c).unwrap();
        }
        let second = rec.finish().unwrap();
        assert_eq!(first, second);
    }
}
