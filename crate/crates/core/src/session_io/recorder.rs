use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::Sender;

use super::{
    AudioChunkEntry, AudioEntry, ContoursEntry, FrameEntry, RecordOutput, SessionError, SessionManifest, StreamEntry,
    AUDIO_FILE, CONTOURS_FILE, FORMAT_VERSION, MANIFEST_FILE,
};
use crate::frame::{AudioChunk, ImageFrame, StreamId};
use crate::pose_calibration::CalibrationProfile;
use crate::raster::encode_png;
use crate::stream_sync::SyncedBundle;
use crate::tongue_contour::ContourRecord;

#[derive(Debug, Clone)]
pub struct RecorderOptions {
    pub outputs: BTreeSet<RecordOutput>,
    /// Fixed id and creation time make repeated recordings byte-identical.
    pub session_id: Option<String>,
    pub created_at: Option<String>,
    pub calibration: Option<CalibrationProfile>,
    pub config: Option<serde_json::Value>,
    /// Upper bound on what a crash can lose.
    pub flush_interval: Duration,
}

impl Default for RecorderOptions {
    fn default() -> Self {
        Self {
            outputs: RecordOutput::all(),
            session_id: None,
            created_at: None,
            calibration: None,
            config: None,
            flush_interval: Duration::from_secs(1),
        }
    }
}

struct Shared {
    frames: Vec<FrameEntry>,
    error: Option<SessionError>,
}

/// Encodes and writes one stream's frames on a dedicated thread, in order.
struct StreamWriter {
    id: StreamId,
    format: Option<crate::frame::PixelFormat>,
    dims: (u32, u32),
    next_ordinal: u64,
    last_ts: Option<u64>,
    tx: Option<Sender<(u64, ImageFrame)>>,
    thread: Option<JoinHandle<()>>,
    shared: Arc<Mutex<Shared>>,
}

impl StreamWriter {
    fn start(dir: &Path, id: StreamId) -> Result<Self, SessionError> {
        let sub = dir.join(id.as_str());
        std::fs::create_dir_all(&sub).map_err(|e| SessionError::io(&sub, e))?;
        let shared = Arc::new(Mutex::new(Shared {
            frames: Vec::new(),
            error: None,
        }));
        let (tx, rx) = crossbeam_channel::bounded::<(u64, ImageFrame)>(16);
        let (t_shared, root) = (shared.clone(), dir.to_path_buf());
        let thread = std::thread::Builder::new()
            .name(format!("record-{id}"))
            .spawn(move || {
                for (ordinal, frame) in rx {
                    let rel = format!("{}/{ordinal:06}.png", id.as_str());
                    let path = root.join(&rel);
                    let result = encode_png(&frame)
                        .map_err(|e| SessionError::corrupt(id, e))
                        .and_then(|png| {
                            std::fs::write(&path, &png).map_err(|e| SessionError::io(&path, e))?;
                            Ok(png)
                        });
                    let mut s = t_shared.lock().unwrap();
                    match result {
                        Ok(png) => s.frames.push(FrameEntry {
                            ordinal,
                            timestamp_us: frame.timestamp_us,
                            file: rel,
                            bytes: png.len() as u64,
                            crc32: crc32fast::hash(&png),
                        }),
                        Err(e) => {
                            s.error.get_or_insert(e);
                        }
                    }
                }
            })
            .expect("spawning recorder thread");
        Ok(Self {
            id,
            format: None,
            dims: (0, 0),
            next_ordinal: 0,
            last_ts: None,
            tx: Some(tx),
            thread: Some(thread),
            shared,
        })
    }

    fn take_error(&self) -> Result<(), SessionError> {
        match self.shared.lock().unwrap().error.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Queues a frame. Returns false for a repeated or older timestamp,
    /// which happens when a held frame is paired again.
    fn push(&mut self, frame: &ImageFrame) -> Result<bool, SessionError> {
        self.take_error()?;
        if self.last_ts.is_some_and(|t| frame.timestamp_us <= t) {
            return Ok(false);
        }
        let dims = (frame.width(), frame.height());
        match self.format {
            None => {
                self.format = Some(frame.format());
                self.dims = dims;
            }
            Some(f) if f != frame.format() || self.dims != dims => {
                return Err(SessionError::InconsistentFrame {
                    stream: self.id,
                    ordinal: self.next_ordinal,
                })
            }
            Some(_) => {}
        }
        self.last_ts = Some(frame.timestamp_us);
        let tx = self.tx.as_ref().expect("writer open until finish");
        tx.send((self.next_ordinal, frame.with_stream(self.id)))
            .map_err(|_| SessionError::corrupt(self.id, "writer thread exited"))?;
        self.next_ordinal += 1;
        Ok(true)
    }

    fn entry(&self) -> StreamEntry {
        let frames = self.shared.lock().unwrap().frames.clone();
        StreamEntry {
            id: self.id,
            pixel_format: self.format,
            width: self.dims.0,
            height: self.dims.1,
            frame_count: frames.len() as u64,
            frames,
        }
    }

    fn finish(&mut self) -> Result<(), SessionError> {
        self.tx.take();
        if let Some(t) = self.thread.take() {
            t.join().map_err(|_| SessionError::corrupt(self.id, "writer thread panicked"))?;
        }
        self.take_error()
    }
}

struct AudioWriter {
    path: PathBuf,
    wav: Option<hound::WavWriter<BufWriter<File>>>,
    rate: u32,
    samples: u64,
    chunks: Vec<AudioChunkEntry>,
}

fn file_crc(path: &Path) -> Result<(u64, u32), SessionError> {
    let bytes = std::fs::read(path).map_err(|e| SessionError::io(path, e))?;
    Ok((bytes.len() as u64, crc32fast::hash(&bytes)))
}

/// Writes one session directory. Frames of each stream must arrive with
/// increasing timestamps; repeats are skipped.
pub struct Recorder {
    dir: PathBuf,
    options: RecorderOptions,
    session_id: String,
    created_at: String,
    streams: Vec<StreamWriter>,
    audio: Option<AudioWriter>,
    contours: Option<(BufWriter<File>, u64)>,
    last_contour_ts: Option<u64>,
    last_flush: Instant,
}

impl Recorder {
    /// Prepares `dir`, failing before any frame is written if it cannot be used.
    pub fn create(dir: &Path, options: RecorderOptions) -> Result<Self, SessionError> {
        if options.outputs.is_empty() {
            return Err(SessionError::NoOutputs);
        }
        let not_writable = |detail: String| SessionError::DirNotWritable {
            dir: dir.to_path_buf(),
            detail,
        };
        std::fs::create_dir_all(dir).map_err(|e| not_writable(e.to_string()))?;
        if dir.join(MANIFEST_FILE).exists() {
            return Err(not_writable("directory already holds a session".into()));
        }
        let probe = dir.join(".write-probe");
        std::fs::write(&probe, b"").map_err(|e| not_writable(e.to_string()))?;
        std::fs::remove_file(&probe).map_err(|e| not_writable(e.to_string()))?;

        let mut streams = Vec::new();
        for id in StreamId::ALL {
            if RecordOutput::for_stream(id).is_some_and(|o| options.outputs.contains(&o)) {
                streams.push(StreamWriter::start(dir, id)?);
            }
        }
        let audio = options.outputs.contains(&RecordOutput::Audio).then(|| AudioWriter {
            path: dir.join(AUDIO_FILE),
            wav: None,
            rate: 0,
            samples: 0,
            chunks: Vec::new(),
        });
        let contours = if options.outputs.contains(&RecordOutput::Contours) {
            let path = dir.join(CONTOURS_FILE);
            let f = File::create(&path).map_err(|e| SessionError::io(&path, e))?;
            Some((BufWriter::new(f), 0))
        } else {
            None
        };
        let now = chrono::Utc::now();
        let rec = Recorder {
            dir: dir.to_path_buf(),
            session_id: options
                .session_id
                .clone()
                .unwrap_or_else(|| format!("session-{}", now.format("%Y%m%dT%H%M%S%.3fZ"))),
            created_at: options.created_at.clone().unwrap_or_else(|| now.to_rfc3339()),
            options,
            streams,
            audio,
            contours,
            last_contour_ts: None,
            last_flush: Instant::now(),
        };
        rec.write_manifest()?;
        Ok(rec)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Replaces the calibration stored in the manifest, e.g. once it has
    /// been derived from the first frames.
    pub fn set_calibration(&mut self, calibration: Option<CalibrationProfile>) {
        self.options.calibration = calibration;
    }

    /// Records a frame if its stream is selected. Returns whether it was written.
    pub fn write_frame(&mut self, frame: &ImageFrame) -> Result<bool, SessionError> {
        let Some(w) = self.streams.iter_mut().find(|w| w.id == frame.stream_id) else {
            return Ok(false);
        };
        let written = w.push(frame)?;
        self.maybe_flush()?;
        Ok(written)
    }

    pub fn write_audio(&mut self, chunk: &AudioChunk) -> Result<bool, SessionError> {
        let Some(a) = self.audio.as_mut() else {
            return Ok(false);
        };
        if a.chunks.last().is_some_and(|c| chunk.timestamp_us <= c.timestamp_us) {
            return Ok(false);
        }
        if a.wav.is_none() {
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: chunk.sample_rate_hz,
                bits_per_sample: 16,
                sample_format: hound::SampleFormat::Int,
            };
            let wav = hound::WavWriter::create(&a.path, spec)
                .map_err(|e| SessionError::corrupt("audio", e))?;
            a.wav = Some(wav);
            a.rate = chunk.sample_rate_hz;
        }
        if chunk.sample_rate_hz != a.rate {
            log::warn!("dropping audio chunk at {} Hz in a {} Hz recording", chunk.sample_rate_hz, a.rate);
            return Ok(false);
        }
        let wav = a.wav.as_mut().unwrap();
        for &s in chunk.samples.iter() {
            wav.write_sample(s).map_err(|e| SessionError::corrupt("audio", e))?;
        }
        a.samples += chunk.samples.len() as u64;
        a.chunks.push(AudioChunkEntry {
            timestamp_us: chunk.timestamp_us,
            samples: chunk.samples.len() as u64,
        });
        self.maybe_flush()?;
        Ok(true)
    }

    pub fn write_contour(&mut self, record: &ContourRecord) -> Result<bool, SessionError> {
        let Some((w, n)) = self.contours.as_mut() else {
            return Ok(false);
        };
        if self.last_contour_ts.is_some_and(|t| record.bundle_ts_us <= t) {
            return Ok(false);
        }
        let path = self.dir.join(CONTOURS_FILE);
        let line = serde_json::to_string(record).map_err(|e| SessionError::corrupt("contours", e))?;
        writeln!(w, "{line}").map_err(|e| SessionError::io(&path, e))?;
        *n += 1;
        self.last_contour_ts = Some(record.bundle_ts_us);
        self.maybe_flush()?;
        Ok(true)
    }

    fn maybe_flush(&mut self) -> Result<(), SessionError> {
        if self.last_flush.elapsed() >= self.options.flush_interval {
            self.flush()?;
        }
        Ok(())
    }

    /// Flushes side files and rewrites the manifest with every frame whose
    /// file is complete.
    pub fn flush(&mut self) -> Result<(), SessionError> {
        if let Some((w, _)) = self.contours.as_mut() {
            w.flush().map_err(|e| SessionError::io(self.dir.join(CONTOURS_FILE), e))?;
        }
        if let Some(wav) = self.audio.as_mut().and_then(|a| a.wav.as_mut()) {
            wav.flush().map_err(|e| SessionError::corrupt("audio", e))?;
        }
        self.write_manifest()?;
        self.last_flush = Instant::now();
        Ok(())
    }

    fn manifest(&self) -> Result<SessionManifest, SessionError> {
        let audio = match &self.audio {
            Some(a) if a.rate > 0 => {
                let (bytes, crc32) = file_crc(&a.path)?;
                Some(AudioEntry {
                    file: AUDIO_FILE.into(),
                    sample_rate_hz: a.rate,
                    sample_count: a.samples,
                    bytes,
                    crc32,
                    chunks: a.chunks.clone(),
                })
            }
            _ => None,
        };
        let contours = match &self.contours {
            Some((_, records)) => {
                let (bytes, crc32) = file_crc(&self.dir.join(CONTOURS_FILE))?;
                Some(ContoursEntry {
                    file: CONTOURS_FILE.into(),
                    records: *records,
                    bytes,
                    crc32,
                })
            }
            None => None,
        };
        Ok(SessionManifest {
            format_version: FORMAT_VERSION,
            session_id: self.session_id.clone(),
            created_at: self.created_at.clone(),
            streams: self.streams.iter().map(StreamWriter::entry).collect(),
            audio,
            contours,
            calibration: self.options.calibration.clone(),
            config: self.options.config.clone(),
        })
    }

    fn write_manifest(&self) -> Result<(), SessionError> {
        let manifest = self.manifest()?;
        let path = self.dir.join(MANIFEST_FILE);
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| SessionError::corrupt("manifest", e))?;
        std::fs::write(&tmp, json).map_err(|e| SessionError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| SessionError::io(&path, e))?;
        Ok(())
    }

    /// Waits for pending writes and writes the final manifest.
    pub fn finish(mut self) -> Result<SessionManifest, SessionError> {
        for w in &mut self.streams {
            w.finish()?;
        }
        if let Some(wav) = self.audio.as_mut().and_then(|a| a.wav.take()) {
            wav.finalize().map_err(|e| SessionError::corrupt("audio", e))?;
        }
        if let Some((w, _)) = self.contours.as_mut() {
            w.flush().map_err(|e| SessionError::io(self.dir.join(CONTOURS_FILE), e))?;
        }
        let manifest = self.manifest()?;
        self.write_manifest()?;
        Ok(manifest)
    }
}

/// Records the raw camera, ultrasound and audio streams of a bundle sequence.
pub fn record_bundles(
    bundles: impl IntoIterator<Item = SyncedBundle>,
    dir: &Path,
    options: RecorderOptions,
) -> Result<SessionManifest, SessionError> {
    let mut rec = Recorder::create(dir, options)?;
    for b in bundles {
        rec.write_frame(&b.rgb)?;
        rec.write_frame(&b.us)?;
        if let Some(a) = &b.audio {
            rec.write_audio(a)?;
        }
    }
    rec.finish()
}
