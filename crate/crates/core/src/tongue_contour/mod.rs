//! From tongue segmentation maps to contour polylines.
//!
//! A segmentation provider turns the cropped ultrasound frame into a
//! per-pixel tongue probability. The map is thresholded and the tongue
//! surface is read off either as the top true pixel of every column or as
//! the longest path through the Zhang-Suen skeleton.

mod distance;
mod export;
mod generator;
mod skeleton;

pub use distance::{contour_distance, contour_distances, ContourDistances, DistanceMetric};
pub use export::{read_contours_jsonl, write_contours_csv, ContourRecord};
pub use generator::{generate_segmentation, NaturalSpline, TongueBandSpec};
pub use skeleton::{skeleton_contour, skeletonize};

use serde::{Deserialize, Serialize};

use crate::frame::{ImageFrame, PixelFormat, StreamId};
use crate::geometry::{FrameDims, Point2};

pub const DEFAULT_THRESHOLD: f32 = 0.5;
pub const DEFAULT_MAX_GAP: usize = 10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ContourError {
    #[error("contour has no points")]
    EmptyContour,
    #[error("tongue band spec rejected: {0}")]
    SpecOutOfBounds(String),
    #[error("probability {value} at index {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f32 },
    #[error("map needs {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
}

/// Per-pixel tongue probability over the cropped ultrasound frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMap {
    width: u32,
    height: u32,
    prob: Vec<f32>,
}

impl SegmentationMap {
    pub fn new(width: u32, height: u32, prob: Vec<f32>) -> Result<Self, ContourError> {
        let expected = width as usize * height as usize;
        if prob.len() != expected {
            return Err(ContourError::SizeMismatch {
                expected,
                actual: prob.len(),
            });
        }
        if let Some((index, &value)) = prob.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ContourError::ProbabilityOutOfRange { index, value });
        }
        Ok(Self { width, height, prob })
    }

    pub fn dims(&self) -> FrameDims {
        FrameDims::new(self.width, self.height)
    }

    pub fn values(&self) -> &[f32] {
        &self.prob
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.prob[(y * self.width + x) as usize]
    }

    /// GRAY8 rendering (probability 1 is white).
    pub fn to_frame(&self, stream_id: StreamId, timestamp_us: u64) -> ImageFrame {
        let bytes: Vec<u8> = self.prob.iter().map(|&p| (p * 255.0).round() as u8).collect();
        ImageFrame::new(stream_id, timestamp_us, self.width, self.height, PixelFormat::Gray8, bytes)
            .expect("map size matches dims")
    }

    /// Inverse of [`SegmentationMap::to_frame`]; RGB input is reduced to luma.
    pub fn from_frame(frame: &ImageFrame) -> SegmentationMap {
        let gray = frame.to_gray();
        SegmentationMap {
            width: gray.width(),
            height: gray.height(),
            prob: gray.payload().iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }
}

/// Stand-in for a learned segmentation network: GRAY8 crop in, probability
/// map of the same size out.
pub trait SegmentationProvider: Send + Sync {
    fn name(&self) -> &str;
    fn segment(&self, crop: &ImageFrame) -> SegmentationMap;
}

/// Treats normalized echo intensity as tongue probability. Adequate for the
/// synthetic ultrasound frames, where the tongue band is the bright structure.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntensityProvider;

impl SegmentationProvider for IntensityProvider {
    fn name(&self) -> &str {
        "intensity"
    }

    fn segment(&self, crop: &ImageFrame) -> SegmentationMap {
        SegmentationMap::from_frame(crop)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.set(x, y, f(x, y));
            }
        }
        m
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

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    /// Out-of-bounds reads are false.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn iter_true(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }
}

/// Ordered tongue-surface polyline in crop pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueContour {
    pub points: Vec<Point2>,
    pub source_dims: FrameDims,
}

impl TongueContour {
    pub fn empty(source_dims: FrameDims) -> Self {
        Self {
            points: Vec::new(),
            source_dims,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> TongueContour {
        TongueContour {
            points: self.points.iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect(),
            source_dims: self.source_dims,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    #[default]
    Top,
    Skeleton,
}

impl std::str::FromStr for ExtractionMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "top" => Ok(ExtractionMethod::Top),
            "skeleton" => Ok(ExtractionMethod::Skeleton),
            other => Err(format!("unknown extraction method {other:?} (expected top or skeleton)")),
        }
    }
}

/// True where `prob >= threshold`.
pub fn binarize(map: &SegmentationMap, threshold: f32) -> BinaryMask {
    BinaryMask {
        width: map.width,
        height: map.height,
        bits: map.prob.iter().map(|&p| p >= threshold).collect(),
    }
}

/// Topmost true row of every non-empty column. Runs of columns separated by
/// more than `max_gap` empty columns are split and only the longest run is
/// kept (the leftmost one on ties). An empty mask yields an empty contour.
pub fn extract_top_pixels(mask: &BinaryMask, max_gap: usize) -> TongueContour {
    let mut runs: Vec<Vec<Point2>> = Vec::new();
    let mut last_col: Option<u32> = None;
    for x in 0..mask.width {
        let Some(y) = (0..mask.height).find(|&y| mask.get(x, y)) else {
            continue;
        };
        let p = Point2::new(x as f64, y as f64);
        match last_col {
            Some(prev) if (x - prev - 1) as usize <= max_gap => runs.last_mut().unwrap().push(p),
            _ => runs.push(vec![p]),
        }
        last_col = Some(x);
    }
    let mut best: Vec<Point2> = Vec::new();
    for run in runs {
        if run.len() > best.len() {
            best = run;
        }
    }
    TongueContour {
        points: best,
        source_dims: mask.dims(),
    }
}

/// Full extraction from a segmentation map with the chosen method.
pub fn extract_contour(map: &SegmentationMap, method: ExtractionMethod, threshold: f32, max_gap: usize) -> TongueContour {
    let mask = binarize(map, threshold);
    match method {
        ExtractionMethod::Top => extract_top_pixels(&mask, max_gap),
        ExtractionMethod::Skeleton => skeleton_contour(&skeletonize(&mask)),
    }
}
