use serde::{Deserialize, Serialize};

use super::{KeypointPair, KeypointSample, TrackingError};
use crate::frame::ImageFrame;
use crate::geometry::Point2;
use crate::pose_calibration::OverlayTransform;
use crate::raster::{resample, Interpolation};

/// One geometric + photometric perturbation. Rotation and scaling are about
/// the frame center; translation is applied afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    pub rotation_deg: f64,
    pub scale: f64,
    pub translation: Point2,
    /// Per-channel additive offset (R, G, B); gray frames use the first entry.
    pub channel_shift: [i16; 3],
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            rotation_deg: 0.0,
            scale: 1.0,
            translation: Point2::new(0.0, 0.0),
            channel_shift: [0; 3],
        }
    }
}

impl AugmentSpec {
    pub fn transform_for(&self, width: u32, height: u32) -> OverlayTransform {
        let center = Point2::new(width as f64 / 2.0, height as f64 / 2.0);
        OverlayTransform::about_center(self.rotation_deg.to_radians(), self.scale, center, self.translation)
    }
}

/// Warps the image and maps the keypoints through the same transform.
/// Uncovered pixels become black. Rejects specs that push a keypoint off-frame.
pub fn augment(sample: &KeypointSample, spec: &AugmentSpec) -> Result<KeypointSample, TrackingError> {
    let img = &sample.image;
    let dims = img.dims();
    let t = spec.transform_for(dims.width, dims.height);

    let m1 = t.apply(sample.truth.m1);
    let m2 = t.apply(sample.truth.m2);
    for point in [m1, m2] {
        if !dims.contains(point) {
            return Err(TrackingError::KeypointOutOfBounds { point, dims });
        }
    }

    let inv = t.inverse();
    let mut pixels = resample(img, dims, Interpolation::Bilinear, |p| inv.apply(p)).pixels;
    if spec.channel_shift != [0; 3] {
        let c = img.channels();
        for px in pixels.chunks_exact_mut(c) {
            for (v, shift) in px.iter_mut().zip(spec.channel_shift) {
                *v = (*v as i16 + shift).clamp(0, 255) as u8;
            }
        }
    }
    let image = ImageFrame::new(img.stream_id, img.timestamp_us, dims.width, dims.height, img.format(), pixels)
        .expect("resample keeps dims");
    Ok(KeypointSample {
        image,
        truth: KeypointPair::new(m1, m2, sample.truth.confidence),
    })
}
