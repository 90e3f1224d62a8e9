//! Deterministic synthetic sources: a face with two moving markers, an
//! ultrasound view of a moving tongue band, and a voiced audio tone.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::source::{AudioSource, FrameSource, SourcePoll};
use super::SyncError;
use crate::frame::{AudioChunk, ImageFrame, PixelFormat, StreamId};
use crate::geometry::{FrameDims, Point2};
use crate::synthetic::{face_backdrop, paint_markers, MarkerSquare};
use crate::tongue_contour::{generate_segmentation, TongueBandSpec};

/// Parameters of a synthetic source, written `key=val,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub seed: u64,
    pub fps: u32,
    /// Frame count; unbounded when absent.
    pub frames: Option<u64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    /// Added to every timestamp. Frames that would land before 0 are skipped.
    pub offset_us: i64,
    /// Stop producing after this many frames.
    pub stall_after: Option<u64>,
    /// Release frames at wall-clock rate instead of as fast as possible.
    pub pace: bool,
    pub noise: f64,
    /// Moves the ultrasound tongue band down by this many pixels.
    pub shift_y: f64,
    /// Scales the band's dome and its motion; 0 gives a flat, still band.
    pub arch: f64,
    pub rate: u32,
    pub chunk_ms: u32,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            seed: 0,
            fps: 30,
            frames: None,
            width: None,
            height: None,
            offset_us: 0,
            stall_after: None,
            pace: false,
            noise: 0.1,
            shift_y: 0.0,
            arch: 1.0,
            rate: 16_000,
            chunk_ms: 20,
        }
    }
}

impl SyntheticParams {
    /// Timestamp of frame `i` (integer microseconds, truncating).
    pub fn timestamp(&self, i: u64) -> i64 {
        self.offset_us + (i * 1_000_000 / self.fps as u64) as i64
    }

    fn dims_or(&self, default: FrameDims) -> FrameDims {
        FrameDims::new(self.width.unwrap_or(default.width), self.height.unwrap_or(default.height))
    }

    fn limit(&self) -> Option<u64> {
        match (self.frames, self.stall_after) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

impl FromStr for SyntheticParams {
    type Err = SyncError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = SyntheticParams::default();
        let bad = |m: String| SyncError::ConfigInvalid(m);
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, val) = item.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {item:?}")))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("{key}: not an integer: {v:?}")));
            match key {
                "seed" => p.seed = num(val)?,
                "fps" => p.fps = num(val)? as u32,
                "frames" => p.frames = Some(num(val)?),
                "width" => p.width = Some(num(val)? as u32),
                "height" => p.height = Some(num(val)? as u32),
                "offset_us" => p.offset_us = val.parse().map_err(|_| bad(format!("offset_us: {val:?}")))?,
                "stall_after" => p.stall_after = Some(num(val)?),
                "pace" => p.pace = matches!(val, "1" | "true"),
                "noise" => p.noise = val.parse().map_err(|_| bad(format!("noise: {val:?}")))?,
                "shift_y" => p.shift_y = val.parse().map_err(|_| bad(format!("shift_y: {val:?}")))?,
                "arch" => p.arch = val.parse().map_err(|_| bad(format!("arch: {val:?}")))?,
                "rate" => p.rate = num(val)? as u32,
                "chunk_ms" => p.chunk_ms = num(val)? as u32,
                _ => return Err(bad(format!("unknown synthetic key {key:?}"))),
            }
        }
        if p.fps == 0 || p.rate == 0 || p.chunk_ms == 0 {
            return Err(bad("fps, rate and chunk_ms must be positive".into()));
        }
        if p.width == Some(0) || p.height == Some(0) {
            return Err(bad("frame dims must be positive".into()));
        }
        if !(0.0..=2.0).contains(&p.arch) {
            return Err(bad(format!("arch must lie in [0, 2], got {}", p.arch)));
        }
        if !p.shift_y.is_finite() {
            return Err(bad("shift_y must be finite".into()));
        }
        if !(0.0..=1.0).contains(&p.noise) {
            return Err(bad(format!("noise must lie in [0, 1], got {}", p.noise)));
        }
        Ok(p)
    }
}

impl fmt::Display for SyntheticParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seed={},fps={}", self.seed, self.fps)?;
        let opt = [
            ("frames", self.frames),
            ("width", self.width.map(u64::from)),
            ("height", self.height.map(u64::from)),
            ("stall_after", self.stall_after),
        ];
        for (k, v) in opt {
            if let Some(v) = v {
                write!(f, ",{k}={v}")?;
            }
        }
        if self.offset_us != 0 {
            write!(f, ",offset_us={}", self.offset_us)?;
        }
        if self.pace {
            f.write_str(",pace=1")?;
        }
        if self.arch != 1.0 {
            write!(f, ",arch={}", self.arch)?;
        }
        if self.shift_y != 0.0 {
            write!(f, ",shift_y={}", self.shift_y)?;
        }
        write!(f, ",noise={},rate={},chunk_ms={}", self.noise, self.rate, self.chunk_ms)
    }
}

/// Frame counter shared by the synthetic sources.
struct Clock {
    params: SyntheticParams,
    next: u64,
    started: Option<Instant>,
}

impl Clock {
    fn new(params: SyntheticParams) -> Self {
        Self {
            params,
            next: 0,
            started: None,
        }
    }

    /// Next (index, timestamp), or None once the limit is reached.
    fn tick(&mut self) -> Option<(u64, u64)> {
        loop {
            let i = self.next;
            if self.params.limit().is_some_and(|n| i >= n) {
                return None;
            }
            self.next += 1;
            let ts = self.params.timestamp(i);
            if ts < 0 {
                continue;
            }
            if self.params.pace {
                let start = *self.started.get_or_insert_with(Instant::now);
                let due = start + Duration::from_micros(ts as u64);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    std::thread::sleep(wait);
                }
            }
            return Some((i, ts as u64));
        }
    }

    fn exhausted(&self) -> SourcePoll<ImageFrame> {
        // A paced source that stalls stays silent like a lost device.
        if self.params.pace && self.params.stall_after.is_some() {
            std::thread::sleep(Duration::from_millis(5));
            SourcePoll::Pending
        } else {
            SourcePoll::Ended
        }
    }
}

fn phases(seed: u64, salt: u64) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    [(); 4].map(|_| rng.gen::<f64>() * 2.0 * PI)
}

/// Gray face backdrop with two orange markers that drift and tilt slowly.
pub struct SyntheticCamera {
    clock: Clock,
    stream_id: StreamId,
    dims: FrameDims,
    backdrop: Vec<u8>,
    phase: [f64; 4],
}

impl SyntheticCamera {
    pub const DEFAULT_DIMS: FrameDims = FrameDims::new(640, 480);

    pub fn new(params: SyntheticParams, stream_id: StreamId) -> Self {
        let dims = params.dims_or(Self::DEFAULT_DIMS);
        Self {
            phase: phases(params.seed, 0xCA3E_7A),
            clock: Clock::new(params),
            stream_id,
            dims,
            backdrop: face_backdrop(dims),
        }
    }

    /// Marker squares at time `t_us`.
    pub fn markers_at(&self, t_us: u64) -> [MarkerSquare; 2] {
        let (w, h) = (self.dims.width as f64, self.dims.height as f64);
        let t = t_us as f64 / 1e6;
        let p = self.phase;
        let size = (14.0 * w / 640.0).max(6.0);
        let shift = Point2::new(0.02 * w * (2.0 * PI * 0.4 * t + p[0]).sin(), 0.015 * h * (2.0 * PI * 0.3 * t + p[1]).sin());
        let tilt = 0.08 * (2.0 * PI * 0.25 * t + p[2]).sin();
        let mid = Point2::new(0.485 * w, 0.635 * h) + shift;
        let half = Point2::new(0.125 * w, 0.015 * h).rotated(tilt);
        [mid - half, mid + half].map(|c| MarkerSquare::new(c.x - size / 2.0, c.y - size / 2.0, size))
    }
}

impl FrameSource for SyntheticCamera {
    fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    fn poll_frame(&mut self) -> Result<SourcePoll<ImageFrame>, SyncError> {
        let Some((_, ts)) = self.clock.tick() else {
            return Ok(self.clock.exhausted());
        };
        let mut buf = self.backdrop.clone();
        paint_markers(&mut buf, self.dims, &self.markers_at(ts));
        let frame = ImageFrame::new(self.stream_id, ts, self.dims.width, self.dims.height, PixelFormat::Rgb8, buf)
            .expect("buffer sized from dims");
        Ok(SourcePoll::Ready(frame))
    }

    fn lossless(&self) -> bool {
        !self.clock.params.pace
    }
}

/// GRAY8 ultrasound frames showing a speckled tongue band whose dome rises
/// and falls over time.
pub struct SyntheticUltrasound {
    clock: Clock,
    stream_id: StreamId,
    dims: FrameDims,
    phase: [f64; 4],
}

impl SyntheticUltrasound {
    pub const DEFAULT_DIMS: FrameDims = FrameDims::new(320, 240);

    pub fn new(params: SyntheticParams, stream_id: StreamId) -> Self {
        let dims = params.dims_or(Self::DEFAULT_DIMS);
        Self {
            phase: phases(params.seed, 0x0017_BA4D),
            clock: Clock::new(params),
            stream_id,
            dims,
        }
    }

    /// Band spec for frame `i` at time `t_us`.
    pub fn band_at(&self, i: u64, t_us: u64) -> TongueBandSpec {
        let (w, h) = (self.dims.width as f64, self.dims.height as f64);
        let t = t_us as f64 / 1e6;
        let thickness = (0.04 * h).max(3.0);
        let control_points = (0..5)
            .map(|k| {
                let u = 0.1 + 0.2 * k as f64;
                let arch = self.clock.params.arch;
                let dome = 0.6 * h - arch * 0.25 * h * (PI * (u - 0.1) / 0.8).sin();
                let wave = arch * 0.07 * h * (2.0 * PI * 0.7 * t + self.phase[k % 4] + k as f64).sin();
                let shift = self.clock.params.shift_y;
                let y = (dome + wave).max(1.0 - shift.min(0.0)).min(h - thickness - 2.0 - shift.max(0.0)) + shift;
                Point2::new((u * (w - 1.0)).round(), y)
            })
            .collect();
        TongueBandSpec {
            frame: self.dims,
            control_points,
            band_thickness: thickness,
            brightness: 0.85,
            speckle_seed: self.clock.params.seed.wrapping_mul(1_000_003).wrapping_add(i),
            noise_level: self.clock.params.noise,
        }
    }
}

impl FrameSource for SyntheticUltrasound {
    fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    fn poll_frame(&mut self) -> Result<SourcePoll<ImageFrame>, SyncError> {
        let Some((i, ts)) = self.clock.tick() else {
            return Ok(self.clock.exhausted());
        };
        let spec = self.band_at(i, ts);
        let (map, _) = generate_segmentation(&spec).map_err(|e| SyncError::SourceFailed {
            stream: self.stream_id,
            detail: e.to_string(),
        })?;
        Ok(SourcePoll::Ready(map.to_frame(self.stream_id, ts)))
    }

    fn lossless(&self) -> bool {
        !self.clock.params.pace
    }
}

/// Chunks of a vowel-like tone whose loudness swells and fades.
pub struct SyntheticAudio {
    params: SyntheticParams,
    next: u64,
    rng: ChaCha8Rng,
    started: Option<Instant>,
}

impl SyntheticAudio {
    pub fn new(params: SyntheticParams) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(params.seed ^ 0xA0D1_0000),
            params,
            next: 0,
            started: None,
        }
    }

    fn chunk_us(&self) -> u64 {
        self.params.chunk_ms as u64 * 1000
    }
}

impl AudioSource for SyntheticAudio {
    fn poll_chunk(&mut self) -> Result<SourcePoll<AudioChunk>, SyncError> {
        let p = &self.params;
        let ts = p.offset_us.max(0) as u64 + self.next * self.chunk_us();
        if let Some(n) = p.frames {
            if ts >= p.timestamp(n).max(0) as u64 {
                return Ok(SourcePoll::Ended);
            }
        }
        if p.pace {
            let start = *self.started.get_or_insert_with(Instant::now);
            if let Some(wait) = (start + Duration::from_micros(ts)).checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        let n = (p.rate as u64 * p.chunk_ms as u64 / 1000) as usize;
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let t = ts as f64 / 1e6 + k as f64 / p.rate as f64;
            let env = 0.5 + 0.5 * (2.0 * PI * 0.5 * t).sin();
            let tone = (2.0 * PI * 150.0 * t).sin() + 0.5 * (2.0 * PI * 300.0 * t).sin();
            let hiss = p.noise * (self.rng.gen::<f64>() * 2.0 - 1.0);
            samples.push((8000.0 * (env * tone + hiss)).round().clamp(-32768.0, 32767.0) as i16);
        }
        self.next += 1;
        Ok(SourcePoll::Ready(AudioChunk::new(ts, p.rate, samples)))
    }

    fn lossless(&self) -> bool {
        !self.params.pace
    }
}
