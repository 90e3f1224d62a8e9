use std::time::Instant;

use serde::Serialize;

use super::config::{AutoCalibration, SegmentationConfig};
use super::ServiceError;
use crate::compositor::{composite, BlendWeights, CompositeStyle};
use crate::frame::{ImageFrame, PixelFormat, StreamId};
use crate::geometry::Rect;
use crate::marker_tracking::{DetectorBackend, KeypointPair};
use crate::pose_calibration::{apply_transform, overlay_transform, pose_from_markers, CalibrationProfile, Pose2D, WarpedImage};
use crate::raster::Interpolation;
use crate::stream_sync::SyncedBundle;
use crate::tongue_contour::{binarize, extract_contour, SegmentationProvider, TongueContour};

/// Wall time spent in each stage of one bundle, microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageLatency {
    pub detect_us: u64,
    pub segment_us: u64,
    pub warp_us: u64,
    pub composite_us: u64,
    pub total_us: u64,
}

impl StageLatency {
    pub fn add(&mut self, other: &StageLatency) {
        self.detect_us += other.detect_us;
        self.segment_us += other.segment_us;
        self.warp_us += other.warp_us;
        self.composite_us += other.composite_us;
        self.total_us += other.total_us;
    }

    pub fn divided(&self, n: u64) -> StageLatency {
        let n = n.max(1);
        StageLatency {
            detect_us: self.detect_us / n,
            segment_us: self.segment_us / n,
            warp_us: self.warp_us / n,
            composite_us: self.composite_us / n,
            total_us: self.total_us / n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Processed {
    pub composite: ImageFrame,
    /// Binarized segmentation of the ultrasound crop, GRAY8 0/255.
    pub pred: ImageFrame,
    /// In crop coordinates.
    pub contour: TongueContour,
    pub keypoints: Option<KeypointPair>,
    /// False when the markers were not found and the last good pair was reused.
    pub markers_fresh: bool,
    pub pose: Option<Pose2D>,
    pub latency: StageLatency,
}

fn micros(since: Instant) -> u64 {
    since.elapsed().as_micros() as u64
}

/// Turns one synchronized bundle into the feedback frame and its by-products.
pub struct Processor {
    detector: Box<dyn DetectorBackend>,
    provider: Box<dyn SegmentationProvider>,
    segmentation: SegmentationConfig,
    calibration: Option<CalibrationProfile>,
    auto: AutoCalibration,
    checked_source: bool,
    last_keypoints: Option<KeypointPair>,
    style: CompositeStyle,
    guideline: bool,
}

impl Processor {
    pub fn new(
        detector: Box<dyn DetectorBackend>,
        provider: Box<dyn SegmentationProvider>,
        segmentation: SegmentationConfig,
        calibration: Option<CalibrationProfile>,
        auto: AutoCalibration,
        style: CompositeStyle,
        guideline: bool,
    ) -> Self {
        Self {
            detector,
            provider,
            segmentation,
            calibration,
            auto,
            checked_source: false,
            last_keypoints: None,
            style,
            guideline,
        }
    }

    /// The profile in use; set from the first detection when none was given.
    pub fn calibration(&self) -> Option<&CalibrationProfile> {
        self.calibration.as_ref()
    }

    pub fn process(&mut self, bundle: &SyncedBundle, weights: &BlendWeights) -> Result<Processed, ServiceError> {
        let start = Instant::now();
        let mut latency = StageLatency::default();

        let t = Instant::now();
        let detected = self.detector.detect(&bundle.rgb).ok();
        let markers_fresh = detected.is_some();
        if let Some(kp) = detected {
            self.last_keypoints = Some(kp);
        }
        let keypoints = self.last_keypoints;
        latency.detect_us = micros(t);

        let us_dims = bundle.us.dims();
        if self.calibration.is_none() {
            if let Some(kp) = &keypoints {
                let crop = self.auto.us_crop.unwrap_or(Rect::new(0, 0, us_dims.width, us_dims.height));
                self.calibration = Some(CalibrationProfile::from_current_markers(kp, self.auto.anchor_offset, crop)?);
            }
        }
        let crop_rect = match &self.calibration {
            Some(cal) => {
                if !self.checked_source {
                    cal.check_source(us_dims)?;
                    self.checked_source = true;
                }
                cal.us_crop
            }
            None => Rect::new(0, 0, us_dims.width, us_dims.height),
        };

        let t = Instant::now();
        let raw = if bundle.us.format() == PixelFormat::Gray8 {
            bundle.us.clone()
        } else {
            bundle.us.to_gray()
        };
        let crop = raw.crop(crop_rect.x, crop_rect.y, crop_rect.width, crop_rect.height);
        let map = self.provider.segment(&crop);
        let seg = &self.segmentation;
        let contour = extract_contour(&map, seg.method, seg.threshold, seg.max_gap);
        let mask = binarize(&map, seg.threshold);
        let pred_px: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
        let pred = ImageFrame::new(StreamId::Pred, bundle.bundle_ts_us, crop.width(), crop.height(), PixelFormat::Gray8, pred_px)
            .expect("mask matches crop");
        latency.segment_us = micros(t);

        let t = Instant::now();
        let canvas = bundle.rgb.dims();
        let pose = match (&keypoints, &self.calibration) {
            (Some(kp), Some(cal)) => pose_from_markers(kp, cal).ok(),
            _ => None,
        };
        let (us_layer, pred_layer) = match (&pose, &self.calibration) {
            (Some(pose), Some(cal)) => {
                let tf = overlay_transform(pose, cal);
                (
                    apply_transform(&tf, &crop, canvas, Interpolation::Bilinear),
                    apply_transform(&tf, &pred, canvas, Interpolation::Nearest),
                )
            }
            _ => (WarpedImage::transparent(&crop, canvas), WarpedImage::transparent(&pred, canvas)),
        };
        latency.warp_us = micros(t);

        let t = Instant::now();
        let guideline = if self.guideline { keypoints.map(|kp| (kp.m1, kp.m2)) } else { None };
        let composite = composite(&bundle.rgb, &us_layer, &pred_layer, weights, &self.style, guideline)
            .map_err(|e| ServiceError::ConfigInvalid(e.to_string()))?;
        latency.composite_us = micros(t);
        latency.total_us = micros(start);

        Ok(Processed {
            composite,
            pred,
            contour,
            keypoints,
            markers_fresh,
            pose,
            latency,
        })
    }
}
