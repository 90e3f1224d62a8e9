//! Deterministic scene rendering used by the synthetic sources and by tests.

use crate::frame::{ImageFrame, PixelFormat, StreamId};
use crate::geometry::{FrameDims, Point2};

pub const MARKER_ORANGE: [u8; 3] = [255, 128, 0];

/// Axis-aligned marker square with its upper-left corner at `corner`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerSquare {
    pub corner: Point2,
    pub size: f64,
}

impl MarkerSquare {
    pub fn new(x: f64, y: f64, size: f64) -> Self {
        Self {
            corner: Point2::new(x, y),
            size,
        }
    }
}

fn overlap(lo: f64, hi: f64, i: i64) -> f64 {
    ((i + 1) as f64).min(hi) - (i as f64).max(lo)
}

/// Paints anti-aliased marker squares (exact area coverage) into an RGB8
/// buffer. Pixels are blended toward [`MARKER_ORANGE`] by their covered area.
pub fn paint_markers(buf: &mut [u8], dims: FrameDims, squares: &[MarkerSquare]) {
    let (w, h) = (dims.width as i64, dims.height as i64);
    for sq in squares {
        let (x0, y0) = (sq.corner.x, sq.corner.y);
        let (x1, y1) = (x0 + sq.size, y0 + sq.size);
        for y in (y0.floor() as i64).max(0)..(y1.ceil() as i64).min(h) {
            let cy = overlap(y0, y1, y);
            if cy <= 0.0 {
                continue;
            }
            for x in (x0.floor() as i64).max(0)..(x1.ceil() as i64).min(w) {
                let c = overlap(x0, x1, x) * cy;
                if c <= 0.0 {
                    continue;
                }
                let i = ((y * w + x) * 3) as usize;
                for ch in 0..3 {
                    let bg = buf[i + ch] as f64;
                    buf[i + ch] = (bg + (MARKER_ORANGE[ch] as f64 - bg) * c).round() as u8;
                }
            }
        }
    }
}

/// Flat gray frame with marker squares.
pub fn render_marker_frame(
    dims: FrameDims,
    squares: &[MarkerSquare],
    background: u8,
    stream_id: StreamId,
    timestamp_us: u64,
) -> ImageFrame {
    let mut buf = vec![background; dims.pixel_count() * 3];
    paint_markers(&mut buf, dims, squares);
    ImageFrame::new(stream_id, timestamp_us, dims.width, dims.height, PixelFormat::Rgb8, buf)
        .expect("buffer sized from dims")
}

/// Neutral (gray) backdrop with a soft vertical gradient and a lighter oval
/// standing in for the side of a face. Stays achromatic so only the markers
/// carry hue.
pub fn face_backdrop(dims: FrameDims) -> Vec<u8> {
    let (w, h) = (dims.width as f64, dims.height as f64);
    let mut buf = Vec::with_capacity(dims.pixel_count() * 3);
    for y in 0..dims.height {
        for x in 0..dims.width {
            let (fx, fy) = ((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
            let mut v = 70.0 + 50.0 * fy;
            let d = ((fx - 0.45) / 0.35).powi(2) + ((fy - 0.45) / 0.45).powi(2);
            if d < 1.0 {
                v += 60.0 * (1.0 - d);
            }
            let g = v.round().clamp(0.0, 255.0) as u8;
            buf.extend_from_slice(&[g, g, g]);
        }
    }
    buf
}
