//! Raster resampling and PNG conversion shared by augmentation, overlay
//! warping and session storage.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::frame::{ImageFrame, PixelFormat, StreamId};
use crate::geometry::{FrameDims, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// Output of an inverse-mapped resample. `alpha` is 255 where the source
/// covered the output pixel and 0 elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resampled {
    pub dims: FrameDims,
    pub format: PixelFormat,
    pub pixels: Vec<u8>,
    pub alpha: Vec<u8>,
}

/// Fills every canvas pixel by sampling `src` at `to_source(center)`.
pub fn resample(
    src: &ImageFrame,
    canvas: FrameDims,
    interp: Interpolation,
    to_source: impl Fn(Point2) -> Point2,
) -> Resampled {
    let c = src.channels();
    let (sw, sh) = (src.width() as usize, src.height() as usize);
    let data = src.payload();
    let mut pixels = vec![0u8; canvas.pixel_count() * c];
    let mut alpha = vec![0u8; canvas.pixel_count()];

    for oy in 0..canvas.height as usize {
        for ox in 0..canvas.width as usize {
            let s = to_source(Point2::new(ox as f64 + 0.5, oy as f64 + 0.5));
            if !(s.x >= 0.0 && s.y >= 0.0 && s.x < sw as f64 && s.y < sh as f64) {
                continue;
            }
            let o = oy * canvas.width as usize + ox;
            alpha[o] = 255;
            let out = &mut pixels[o * c..(o + 1) * c];
            match interp {
                Interpolation::Nearest => {
                    let i = (s.y as usize * sw + s.x as usize) * c;
                    out.copy_from_slice(&data[i..i + c]);
                }
                Interpolation::Bilinear => {
                    let u = s.x - 0.5;
                    let v = s.y - 0.5;
                    let x0 = u.floor();
                    let y0 = v.floor();
                    let fx = u - x0;
                    let fy = v - y0;
                    let clamp_x = |x: f64| x.clamp(0.0, (sw - 1) as f64) as usize;
                    let clamp_y = |y: f64| y.clamp(0.0, (sh - 1) as f64) as usize;
                    let (xa, xb) = (clamp_x(x0), clamp_x(x0 + 1.0));
                    let (ya, yb) = (clamp_y(y0), clamp_y(y0 + 1.0));
                    let at = |x: usize, y: usize, ch: usize| data[(y * sw + x) * c + ch] as f64;
                    for (ch, o) in out.iter_mut().enumerate() {
                        let top = at(xa, ya, ch) * (1.0 - fx) + at(xb, ya, ch) * fx;
                        let bot = at(xa, yb, ch) * (1.0 - fx) + at(xb, yb, ch) * fx;
                        *o = round_u8(top * (1.0 - fy) + bot * fy);
                    }
                }
            }
        }
    }

    Resampled {
        dims: canvas,
        format: src.format(),
        pixels,
        alpha,
    }
}

pub fn round_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Bilinear sample at a continuous position, clamping at the borders.
pub fn sample_bilinear(img: &ImageFrame, p: Point2) -> Vec<f64> {
    let c = img.channels();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let u = p.x - 0.5;
    let v = p.y - 0.5;
    let x0 = u.floor();
    let y0 = v.floor();
    let fx = u - x0;
    let fy = v - y0;
    let cx = |x: f64| x.clamp(0.0, (w - 1) as f64) as usize;
    let cy = |y: f64| y.clamp(0.0, (h - 1) as f64) as usize;
    let (xa, xb, ya, yb) = (cx(x0), cx(x0 + 1.0), cy(y0), cy(y0 + 1.0));
    let data = img.payload();
    let at = |x: usize, y: usize, ch: usize| data[(y * w + x) * c + ch] as f64;
    (0..c)
        .map(|ch| {
            let top = at(xa, ya, ch) * (1.0 - fx) + at(xb, ya, ch) * fx;
            let bot = at(xa, yb, ch) * (1.0 - fx) + at(xb, yb, ch) * fx;
            top * (1.0 - fy) + bot * fy
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum PngError {
    #[error("png codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported image layout {0:?}")]
    Unsupported(image::ColorType),
}

/// Lossless PNG bytes for a frame. Encoding is deterministic.
pub fn encode_png(frame: &ImageFrame) -> Result<Vec<u8>, PngError> {
    let mut out = Vec::new();
    let color = match frame.format() {
        PixelFormat::Gray8 => ExtendedColorType::L8,
        PixelFormat::Rgb8 => ExtendedColorType::Rgb8,
    };
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Sub).write_image(
        frame.payload(),
        frame.width(),
        frame.height(),
        color,
    )?;
    Ok(out)
}

pub fn decode_png(bytes: &[u8], stream_id: StreamId, timestamp_us: u64) -> Result<ImageFrame, PngError> {
    let img = image::load(Cursor::new(bytes), image::ImageFormat::Png)?;
    Ok(from_dynamic(img, stream_id, timestamp_us))
}

pub fn load_png(path: &Path, stream_id: StreamId, timestamp_us: u64) -> Result<ImageFrame, PngError> {
    let bytes = std::fs::read(path)?;
    decode_png(&bytes, stream_id, timestamp_us)
}

pub fn save_png(frame: &ImageFrame, path: &Path) -> Result<(), PngError> {
    std::fs::write(path, encode_png(frame)?)?;
    Ok(())
}

fn from_dynamic(img: DynamicImage, stream_id: StreamId, timestamp_us: u64) -> ImageFrame {
    let (w, h) = (img.width(), img.height());
    match img {
        DynamicImage::ImageLuma8(buf) => {
            ImageFrame::new(stream_id, timestamp_us, w, h, PixelFormat::Gray8, buf.into_raw())
        }
        other => ImageFrame::new(stream_id, timestamp_us, w, h, PixelFormat::Rgb8, other.into_rgb8().into_raw()),
    }
    .expect("decoder returns consistent buffers")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resample_is_exact() {
        let payload: Vec<u8> = (0..48u8).map(|v| v.wrapping_mul(37)).collect();
        let f = ImageFrame::new(StreamId::Rgb, 0, 4, 4, PixelFormat::Rgb8, payload.clone()).unwrap();
        let r = resample(&f, f.dims(), Interpolation::Bilinear, |p| p);
        assert_eq!(r.pixels, payload);
        assert!(r.alpha.iter().all(|&a| a == 255));
    }

    #[test]
    fn png_round_trip_gray_and_rgb() {
        let g = ImageFrame::new(StreamId::Us, 5, 3, 2, PixelFormat::Gray8, vec![0, 50, 100, 150, 200, 250]).unwrap();
        let back = decode_png(&encode_png(&g).unwrap(), StreamId::Us, 5).unwrap();
        assert_eq!(back, g);
        let c = ImageFrame::filled(StreamId::Rgb, 1, FrameDims::new(5, 4), PixelFormat::Rgb8, 77);
        let back = decode_png(&encode_png(&c).unwrap(), StreamId::Rgb, 1).unwrap();
        assert_eq!(back, c);
    }
}
