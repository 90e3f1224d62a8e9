//! Marker geometry to overlay placement.
//!
//! The probe holder moves roughly parallel to the camera's image plane, so
//! the two marker corners fully determine a 2D similarity transform: their
//! separation gives the scale, the direction of the segment between them the
//! rotation, and a marker-relative anchor point the translation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frame::{ImageFrame, PixelFormat};
use crate::geometry::{FrameDims, Point2, Rect};
use crate::marker_tracking::KeypointPair;
use crate::raster::{resample, Interpolation};

/// Marker separations below this are treated as a failed detection.
pub const MIN_MARKER_DISTANCE_PX: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("markers are {distance:.3} px apart, below the {MIN_MARKER_DISTANCE_PX} px minimum")]
    DegenerateMarkers { distance: f64 },
    #[error("invalid calibration profile: {0}")]
    InvalidProfile(String),
    #[error("ultrasound crop {crop:?} does not fit a {dims:?} source frame")]
    CropOutOfBounds { crop: Rect, dims: FrameDims },
    #[error("reading calibration: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing calibration: {0}")]
    Json(#[from] serde_json::Error),
}

/// Stored result of the one-shot calibration, persisted as `calib.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationProfile {
    /// Marker separation that corresponds to an overlay scale of 1.
    pub ref_marker_distance_px: f64,
    /// Anchor position in the marker frame: origin at m1, x axis toward m2,
    /// one unit equal to the marker separation.
    pub anchor_offset: Point2,
    pub base_rotation_offset_rad: f64,
    /// Region of the raw ultrasound frame that is segmented and overlaid.
    pub us_crop: Rect,
    /// Point of the cropped ultrasound frame that lands on the anchor.
    pub us_anchor: Point2,
}

impl CalibrationProfile {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if !(self.ref_marker_distance_px > 0.0 && self.ref_marker_distance_px.is_finite()) {
            return Err(CalibrationError::InvalidProfile(format!(
                "ref_marker_distance_px must be positive, got {}",
                self.ref_marker_distance_px
            )));
        }
        if self.us_crop.is_empty() {
            return Err(CalibrationError::InvalidProfile("us_crop is empty".into()));
        }
        let finite = [
            self.anchor_offset.x,
            self.anchor_offset.y,
            self.base_rotation_offset_rad,
            self.us_anchor.x,
            self.us_anchor.y,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(CalibrationError::InvalidProfile("non-finite field".into()));
        }
        Ok(())
    }

    /// Checks the crop against the dimensions of the raw ultrasound source.
    pub fn check_source(&self, dims: FrameDims) -> Result<(), CalibrationError> {
        if self.us_crop.fits_within(dims) {
            Ok(())
        } else {
            Err(CalibrationError::CropOutOfBounds {
                crop: self.us_crop,
                dims,
            })
        }
    }

    /// Captures the current marker geometry as the reference pose: the
    /// present separation becomes scale 1 and the present orientation angle 0.
    /// The ultrasound anchor is the top-center of the crop.
    pub fn from_current_markers(
        kp: &KeypointPair,
        anchor_offset: Point2,
        us_crop: Rect,
    ) -> Result<Self, CalibrationError> {
        let d = kp.m2 - kp.m1;
        let distance = d.norm();
        if distance < MIN_MARKER_DISTANCE_PX {
            return Err(CalibrationError::DegenerateMarkers { distance });
        }
        let profile = CalibrationProfile {
            ref_marker_distance_px: distance,
            anchor_offset,
            base_rotation_offset_rad: -d.y.atan2(d.x),
            us_crop,
            us_anchor: Point2::new(us_crop.width as f64 / 2.0, 0.0),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let profile: CalibrationProfile = serde_json::from_slice(&std::fs::read(path)?)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub angle_rad: f64,
    pub scale: f64,
    pub anchor_px: Point2,
}

/// Estimates the probe pose on the face from the two marker corners.
pub fn pose_from_markers(kp: &KeypointPair, cal: &CalibrationProfile) -> Result<Pose2D, CalibrationError> {
    let d = kp.m2 - kp.m1;
    let distance = d.norm();
    if distance < MIN_MARKER_DISTANCE_PX {
        return Err(CalibrationError::DegenerateMarkers { distance });
    }
    let scale = distance / cal.ref_marker_distance_px;
    let angle_rad = d.y.atan2(d.x) + cal.base_rotation_offset_rad;
    let local = cal.anchor_offset * cal.ref_marker_distance_px;
    let anchor_px = kp.m1 + local.rotated(angle_rad) * scale;
    Ok(Pose2D {
        angle_rad,
        scale,
        anchor_px,
    })
}

/// Similarity transform `p -> scale * R(rotation) * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayTransform {
    pub rotation_rad: f64,
    pub scale: f64,
    pub translation: Point2,
}

impl OverlayTransform {
    pub const IDENTITY: OverlayTransform = OverlayTransform {
        rotation_rad: 0.0,
        scale: 1.0,
        translation: Point2::new(0.0, 0.0),
    };

    /// Panics if `scale` is not strictly positive: reflections and collapses
    /// are not similarity transforms.
    pub fn new(rotation_rad: f64, scale: f64, translation: Point2) -> Self {
        assert!(scale > 0.0 && scale.is_finite(), "similarity scale must be positive, got {scale}");
        Self {
            rotation_rad,
            scale,
            translation,
        }
    }

    /// Rotation and scale about `center`, followed by `shift`.
    pub fn about_center(rotation_rad: f64, scale: f64, center: Point2, shift: Point2) -> Self {
        let translation = center + shift - center.rotated(rotation_rad) * scale;
        Self::new(rotation_rad, scale, translation)
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotated(self.rotation_rad) * self.scale + self.translation
    }

    pub fn inverse(&self) -> OverlayTransform {
        let inv_scale = 1.0 / self.scale;
        OverlayTransform {
            rotation_rad: -self.rotation_rad,
            scale: inv_scale,
            translation: self.translation.rotated(-self.rotation_rad) * -inv_scale,
        }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &OverlayTransform) -> OverlayTransform {
        OverlayTransform {
            rotation_rad: self.rotation_rad + first.rotation_rad,
            scale: self.scale * first.scale,
            translation: self.apply(first.translation),
        }
    }
}

/// Transform placing the cropped ultrasound frame so that `cal.us_anchor`
/// lands on the pose anchor.
pub fn overlay_transform(pose: &Pose2D, cal: &CalibrationProfile) -> OverlayTransform {
    let translation = pose.anchor_px - cal.us_anchor.rotated(pose.angle_rad) * pose.scale;
    OverlayTransform::new(pose.angle_rad, pose.scale, translation)
}

/// A frame resampled onto a canvas, with its coverage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedImage {
    pub image: ImageFrame,
    /// 255 where the source image covers the pixel, 0 where it is transparent.
    pub alpha: Vec<u8>,
}

impl WarpedImage {
    /// A fully transparent canvas.
    pub fn transparent(template: &ImageFrame, canvas: FrameDims) -> Self {
        WarpedImage {
            image: ImageFrame::filled(template.stream_id, template.timestamp_us, canvas, template.format(), 0),
            alpha: vec![0; canvas.pixel_count()],
        }
    }

    pub fn is_opaque_at(&self, x: u32, y: u32) -> bool {
        self.alpha[(y * self.image.width() + x) as usize] != 0
    }
}

/// Resamples `img` onto a canvas through `t`: each output pixel reads the
/// source at `t^-1(pixel center)`.
pub fn apply_transform(
    t: &OverlayTransform,
    img: &ImageFrame,
    canvas: FrameDims,
    interp: Interpolation,
) -> WarpedImage {
    let inv = t.inverse();
    let r = resample(img, canvas, interp, |p| inv.apply(p));
    debug_assert!(matches!(r.format, PixelFormat::Gray8 | PixelFormat::Rgb8));
    WarpedImage {
        image: ImageFrame::new(img.stream_id, img.timestamp_us, canvas.width, canvas.height, r.format, r.pixels)
            .expect("resample output matches canvas"),
        alpha: r.alpha,
    }
}
