use serde::{Deserialize, Serialize};

use super::{DetectorBackend, KeypointPair, TrackingError};
use crate::frame::{ImageFrame, PixelFormat};
use crate::geometry::Point2;

/// HSV thresholds selecting marker pixels. Hue is in degrees; when
/// `hue_min > hue_max` the band wraps through 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorBlobConfig {
    pub hue_min: f64,
    pub hue_max: f64,
    pub sat_min: f64,
    pub val_min: f64,
    /// Blobs smaller than this (px^2) are ignored.
    pub min_area: usize,
    /// Blob area that maps to confidence 1.
    pub expected_area: usize,
}

impl Default for ColorBlobConfig {
    fn default() -> Self {
        // orange
        ColorBlobConfig {
            hue_min: 10.0,
            hue_max: 45.0,
            sat_min: 0.5,
            val_min: 0.35,
            min_area: 16,
            expected_area: 400,
        }
    }
}

impl ColorBlobConfig {
    fn hue_in_band(&self, hue: f64) -> bool {
        if self.hue_min <= self.hue_max {
            (self.hue_min..=self.hue_max).contains(&hue)
        } else {
            hue >= self.hue_min || hue <= self.hue_max
        }
    }

    fn is_marker(&self, px: [u8; 3]) -> bool {
        let (h, s, v) = hsv(px);
        s >= self.sat_min && v >= self.val_min && self.hue_in_band(h)
    }

    /// Chroma of pixels whose hue is in band, zero otherwise. Over a neutral
    /// background the chroma of a partially covered pixel is linear in the
    /// covered fraction, which the corner refinement relies on.
    fn band_chroma(&self, px: [u8; 3]) -> f64 {
        let max = px.iter().copied().max().unwrap() as f64;
        let min = px.iter().copied().min().unwrap() as f64;
        let chroma = max - min;
        if chroma <= 0.0 || !self.hue_in_band(hsv(px).0) {
            0.0
        } else {
            chroma
        }
    }
}

/// (hue in degrees, saturation, value) with s and v in [0, 1].
fn hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max / 255.0)
}

#[derive(Debug)]
struct Blob {
    area: usize,
    min_x: u32,
    min_y: u32,
    max_x: u32,
    max_y: u32,
    chroma: Vec<u8>,
}

/// 8-connected components of the marker mask.
fn find_blobs(frame: &ImageFrame, config: &ColorBlobConfig) -> Vec<Blob> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let data = frame.payload();
    let mask: Vec<bool> = data
        .chunks_exact(3)
        .map(|p| config.is_marker([p[0], p[1], p[2]]))
        .collect();
    let mut seen = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();

    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut blob = Blob {
            area: 0,
            min_x: u32::MAX,
            min_y: u32::MAX,
            max_x: 0,
            max_y: 0,
            chroma: Vec::new(),
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            blob.area += 1;
            blob.min_x = blob.min_x.min(x as u32);
            blob.min_y = blob.min_y.min(y as u32);
            blob.max_x = blob.max_x.max(x as u32);
            blob.max_y = blob.max_y.max(y as u32);
            let p = &data[i * 3..i * 3 + 3];
            blob.chroma.push(p.iter().max().unwrap() - p.iter().min().unwrap());
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if mask[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if blob.area >= config.min_area {
            blobs.push(blob);
        }
    }
    // Largest first; position breaks ties so the order never depends on scan details.
    blobs.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.min_x.cmp(&b.min_x))
            .then(a.min_y.cmp(&b.min_y))
    });
    blobs
}

/// Subpixel upper-left corner of a blob.
///
/// In the 3x3 window around the bounding-box corner, each pixel is weighted
/// by its marker coverage (in-band chroma over the blob's median chroma). Along
/// the window row one pixel inside the blob, the covered interval runs from the
/// edge `e` to the window's far side `R`, so its weighted centroid is
/// `(e + R) / 2 = R - S / 2` for coverage sum `S`; solving gives `e = R - S`.
/// The column one pixel inside gives the y edge the same way.
fn refine_corner(frame: &ImageFrame, config: &ColorBlobConfig, blob: &mut Blob) -> Point2 {
    let (cx, cy) = (blob.min_x as i64, blob.min_y as i64);
    let corner = Point2::new(cx as f64, cy as f64);
    if blob.max_x < blob.min_x + 2 || blob.max_y < blob.min_y + 2 {
        return corner;
    }
    let mid = blob.chroma.len() / 2;
    let reference = *blob.chroma.select_nth_unstable(mid).1 as f64;
    if reference <= 0.0 {
        return corner;
    }
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let weight = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w || y >= h {
            return 0.0;
        }
        let p = frame.pixel(x as u32, y as u32);
        (config.band_chroma([p[0], p[1], p[2]]) / reference).min(1.0)
    };
    let coverage_x: f64 = (cx - 1..=cx + 1).map(|x| weight(x, cy + 1)).sum();
    let coverage_y: f64 = (cy - 1..=cy + 1).map(|y| weight(cx + 1, y)).sum();
    let far = 2.0;
    let ex = (cx as f64 + far - coverage_x).clamp(cx as f64 - 1.0, cx as f64 + 1.0);
    let ey = (cy as f64 + far - coverage_y).clamp(cy as f64 - 1.0, cy as f64 + 1.0);
    Point2::new(ex.max(0.0), ey.max(0.0))
}

/// Finds the upper-left corners of the two largest marker-colored blobs.
pub fn detect_markers(frame: &ImageFrame, config: &ColorBlobConfig) -> Result<KeypointPair, TrackingError> {
    if frame.format() != PixelFormat::Rgb8 {
        return Err(TrackingError::UnsupportedFormat(frame.format()));
    }
    let mut blobs = find_blobs(frame, config);
    if blobs.len() < 2 {
        return Err(TrackingError::FewerThanTwoBlobs { found: blobs.len() });
    }
    if blobs.len() > 2 && blobs[2].area as f64 >= 0.8 * blobs[1].area as f64 {
        return Err(TrackingError::AmbiguousBlobs {
            second: blobs[1].area,
            third: blobs[2].area,
        });
    }
    let smaller = blobs[1].area;
    let confidence = (smaller as f64 / config.expected_area.max(1) as f64).min(1.0);
    let a = refine_corner(frame, config, &mut blobs[0]);
    let b = refine_corner(frame, config, &mut blobs[1]);
    Ok(KeypointPair::new(a, b, confidence))
}

/// Reference backend: HSV thresholding plus connected components.
#[derive(Debug, Clone, Default)]
pub struct ColorBlobDetector {
    pub config: ColorBlobConfig,
}

impl ColorBlobDetector {
    pub fn new(config: ColorBlobConfig) -> Self {
        Self { config }
    }
}

impl DetectorBackend for ColorBlobDetector {
    fn name(&self) -> &str {
        "color_blob"
    }

    fn detect(&self, frame: &ImageFrame) -> Result<KeypointPair, TrackingError> {
        detect_markers(frame, &self.config)
    }
}
