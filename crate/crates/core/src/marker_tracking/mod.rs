//! Locating the two probe-holder markers in camera frames, plus the dataset
//! tooling used to build and score keypoint detectors.

mod augment;
mod dataset;
mod detect;
mod mae;

pub use augment::{augment, AugmentSpec};
pub use dataset::{augment_dataset, load_samples, AugmentSummary, LabelRecord, DatasetError};
pub use detect::{detect_markers, ColorBlobConfig, ColorBlobDetector};
pub use mae::{evaluate_mae, MaeReport};

use serde::{Deserialize, Serialize};

use crate::frame::{ImageFrame, PixelFormat};
use crate::geometry::{FrameDims, Point2};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrackingError {
    #[error("found {found} qualifying marker blob(s), need two")]
    FewerThanTwoBlobs { found: usize },
    #[error("third blob ({third} px) is too close in size to the second ({second} px)")]
    AmbiguousBlobs { second: usize, third: usize },
    #[error("marker detection needs an RGB8 frame, got {0:?}")]
    UnsupportedFormat(PixelFormat),
    #[error("keypoint {point:?} leaves the {dims:?} frame")]
    KeypointOutOfBounds { point: Point2, dims: FrameDims },
    #[error("{pred} predictions but {truth} ground-truth pairs")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("normalization dims must be positive, got {0:?}")]
    InvalidNorm(FrameDims),
}

/// The two marker corners in frame pixels, in canonical order: `m1` has the
/// smaller x, ties broken by the smaller y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointPair {
    pub m1: Point2,
    pub m2: Point2,
    pub confidence: f64,
}

impl KeypointPair {
    /// Builds a pair, reordering the points canonically.
    pub fn new(a: Point2, b: Point2, confidence: f64) -> Self {
        let swap = b.x < a.x || (b.x == a.x && b.y < a.y);
        let (m1, m2) = if swap { (b, a) } else { (a, b) };
        KeypointPair {
            m1,
            m2,
            confidence: confidence.clamp(0.0, 1.0),
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.m1.x < self.m2.x || (self.m1.x == self.m2.x && self.m1.y <= self.m2.y)
    }

    pub fn within(&self, dims: FrameDims) -> bool {
        dims.contains(self.m1) && dims.contains(self.m2)
    }

    pub fn translated(&self, d: Point2) -> Self {
        KeypointPair::new(self.m1 + d, self.m2 + d, self.confidence)
    }
}

/// Anything that can turn a camera frame into marker keypoints. Implementations
/// must be deterministic for a fixed frame and configuration.
pub trait DetectorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, frame: &ImageFrame) -> Result<KeypointPair, TrackingError>;
}

/// An annotated training image.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSample {
    pub image: ImageFrame,
    pub truth: KeypointPair,
}

impl KeypointSample {
    pub fn new(image: ImageFrame, truth: KeypointPair) -> Result<Self, TrackingError> {
        let dims = image.dims();
        for point in [truth.m1, truth.m2] {
            if !dims.contains(point) {
                return Err(TrackingError::KeypointOutOfBounds { point, dims });
            }
        }
        Ok(Self { image, truth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_ordering_by_x_then_y() {
        let kp = KeypointPair::new(Point2::new(5.0, 1.0), Point2::new(2.0, 9.0), 0.5);
        assert_eq!(kp.m1, Point2::new(2.0, 9.0));
        let tie = KeypointPair::new(Point2::new(3.0, 8.0), Point2::new(3.0, 2.0), 2.0);
        assert_eq!(tie.m1, Point2::new(3.0, 2.0));
        assert_eq!(tie.confidence, 1.0);
        assert!(tie.is_canonical());
    }

    #[test]
    fn sample_rejects_out_of_frame_truth() {
        let img = ImageFrame::filled(crate::frame::StreamId::Rgb, 0, FrameDims::new(10, 10), PixelFormat::Rgb8, 0);
        let kp = KeypointPair::new(Point2::new(1.0, 1.0), Point2::new(10.0, 3.0), 1.0);
        assert!(matches!(
            KeypointSample::new(img, kp),
            Err(TrackingError::KeypointOutOfBounds { .. })
        ));
    }
}
