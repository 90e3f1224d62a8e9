//! Timestamped media values passed between pipeline stages.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::FrameDims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamId {
    Rgb,
    Us,
    Pred,
    Composite,
    Ref,
}

impl StreamId {
    pub const ALL: [StreamId; 5] = [
        StreamId::Rgb,
        StreamId::Us,
        StreamId::Pred,
        StreamId::Composite,
        StreamId::Ref,
    ];

    /// Numeric id used on the wire.
    pub fn wire_id(self) -> u8 {
        match self {
            StreamId::Rgb => 0,
            StreamId::Us => 1,
            StreamId::Pred => 2,
            StreamId::Composite => 3,
            StreamId::Ref => 4,
        }
    }

    pub fn from_wire_id(id: u8) -> Option<StreamId> {
        StreamId::ALL.into_iter().find(|s| s.wire_id() == id)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StreamId::Rgb => "rgb",
            StreamId::Us => "us",
            StreamId::Pred => "pred",
            StreamId::Composite => "composite",
            StreamId::Ref => "ref",
        }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelFormat {
    #[serde(rename = "GRAY8")]
    Gray8,
    #[serde(rename = "RGB8")]
    Rgb8,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            PixelFormat::Gray8 => 1,
            PixelFormat::Rgb8 => 3,
        }
    }

    pub fn wire_id(self) -> u8 {
        match self {
            PixelFormat::Gray8 => 0,
            PixelFormat::Rgb8 => 1,
        }
    }

    pub fn from_wire_id(id: u8) -> Option<PixelFormat> {
        match id {
            0 => Some(PixelFormat::Gray8),
            1 => Some(PixelFormat::Rgb8),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("payload is {actual} bytes, expected {expected} for {width}x{height} {format:?}")]
pub struct PayloadSizeError {
    pub width: u32,
    pub height: u32,
    pub format: PixelFormat,
    pub expected: usize,
    pub actual: usize,
}

/// A raster from one named stream. The payload is shared, so clones are cheap.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageFrame {
    pub stream_id: StreamId,
    /// Microseconds since the session epoch.
    pub timestamp_us: u64,
    width: u32,
    height: u32,
    format: PixelFormat,
    payload: Arc<[u8]>,
}

impl fmt::Debug for ImageFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageFrame")
            .field("stream_id", &self.stream_id)
            .field("timestamp_us", &self.timestamp_us)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("format", &self.format)
            .field("payload_len", &self.payload.len())
            .finish()
    }
}

impl ImageFrame {
    pub fn new(
        stream_id: StreamId,
        timestamp_us: u64,
        width: u32,
        height: u32,
        format: PixelFormat,
        payload: impl Into<Arc<[u8]>>,
    ) -> Result<Self, PayloadSizeError> {
        let payload = payload.into();
        let expected = width as usize * height as usize * format.channels();
        if payload.len() != expected {
            return Err(PayloadSizeError {
                width,
                height,
                format,
                expected,
                actual: payload.len(),
            });
        }
        Ok(Self {
            stream_id,
            timestamp_us,
            width,
            height,
            format,
            payload,
        })
    }

    /// Frame filled with a single value in every byte.
    pub fn filled(stream_id: StreamId, timestamp_us: u64, dims: FrameDims, format: PixelFormat, value: u8) -> Self {
        let len = dims.pixel_count() * format.channels();
        Self::new(stream_id, timestamp_us, dims.width, dims.height, format, vec![value; len])
            .expect("length computed from dims")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> FrameDims {
        FrameDims::new(self.width, self.height)
    }

    pub fn format(&self) -> PixelFormat {
        self.format
    }

    pub fn channels(&self) -> usize {
        self.format.channels()
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn with_stream(&self, stream_id: StreamId) -> ImageFrame {
        ImageFrame {
            stream_id,
            ..self.clone()
        }
    }

    pub fn with_timestamp(&self, timestamp_us: u64) -> ImageFrame {
        ImageFrame {
            timestamp_us,
            ..self.clone()
        }
    }

    /// Channel bytes of pixel `(x, y)`. Panics when out of bounds.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels();
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.payload[i..i + c]
    }

    /// Pixel as RGB; gray is replicated across channels.
    pub fn rgb_at(&self, x: u32, y: u32) -> [u8; 3] {
        match self.pixel(x, y) {
            [v] => [*v, *v, *v],
            [r, g, b] => [*r, *g, *b],
            _ => unreachable!("only 1 and 3 channel formats exist"),
        }
    }

    /// Copies a sub-rectangle. The caller guarantees the rectangle is in bounds.
    pub fn crop(&self, x: u32, y: u32, width: u32, height: u32) -> ImageFrame {
        let c = self.channels();
        let mut out = Vec::with_capacity(width as usize * height as usize * c);
        for row in y..y + height {
            let start = (row as usize * self.width as usize + x as usize) * c;
            out.extend_from_slice(&self.payload[start..start + width as usize * c]);
        }
        ImageFrame::new(self.stream_id, self.timestamp_us, width, height, self.format, out)
            .expect("crop length computed from dims")
    }

    /// Luma (BT.601 integer weights) or the gray value itself.
    pub fn to_gray(&self) -> ImageFrame {
        match self.format {
            PixelFormat::Gray8 => self.clone(),
            PixelFormat::Rgb8 => {
                let out: Vec<u8> = self
                    .payload
                    .chunks_exact(3)
                    .map(|p| ((p[0] as u32 * 299 + p[1] as u32 * 587 + p[2] as u32 * 114 + 500) / 1000) as u8)
                    .collect();
                ImageFrame::new(self.stream_id, self.timestamp_us, self.width, self.height, PixelFormat::Gray8, out)
                    .expect("gray length computed from dims")
            }
        }
    }
}

/// Mono signed 16-bit PCM audio.
#[derive(Clone, PartialEq, Eq)]
pub struct AudioChunk {
    pub timestamp_us: u64,
    pub sample_rate_hz: u32,
    pub samples: Arc<[i16]>,
}

impl fmt::Debug for AudioChunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AudioChunk")
            .field("timestamp_us", &self.timestamp_us)
            .field("sample_rate_hz", &self.sample_rate_hz)
            .field("samples", &self.samples.len())
            .finish()
    }
}

impl AudioChunk {
    pub fn new(timestamp_us: u64, sample_rate_hz: u32, samples: impl Into<Arc<[i16]>>) -> Self {
        assert!(sample_rate_hz > 0, "sample rate must be positive");
        Self {
            timestamp_us,
            sample_rate_hz,
            samples: samples.into(),
        }
    }

    pub fn duration_us(&self) -> u64 {
        self.samples.len() as u64 * 1_000_000 / self.sample_rate_hz as u64
    }

    pub fn end_us(&self) -> u64 {
        self.timestamp_us + self.duration_us()
    }

    pub fn covers(&self, t_us: u64) -> bool {
        self.timestamp_us <= t_us && t_us < self.end_us()
    }

    /// Root-mean-square level normalized to full scale.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| (s as f64 / 32768.0).powi(2)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }
}
