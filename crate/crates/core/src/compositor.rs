//! Blending of the camera frame, the warped ultrasound crop and the warped
//! prediction mask into the feedback frame.

use serde::{Deserialize, Serialize};

use crate::frame::{ImageFrame, PixelFormat, StreamId};
use crate::geometry::{FrameDims, Point2};
use crate::pose_calibration::WarpedImage;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CompositeError {
    #[error("{layer} is {actual:?}, camera frame is {expected:?}")]
    DimsMismatch {
        layer: &'static str,
        expected: FrameDims,
        actual: FrameDims,
    },
    #[error("blend weights must lie in [0, 1]: {0:?}")]
    InvalidWeights(BlendWeights),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    pub w_rgb: f64,
    pub w_us: f64,
    pub w_pred: f64,
}

impl Default for BlendWeights {
    fn default() -> Self {
        Self {
            w_rgb: 0.9,
            w_us: 0.4,
            w_pred: 1.0,
        }
    }
}

impl BlendWeights {
    pub fn new(w_rgb: f64, w_us: f64, w_pred: f64) -> Result<Self, CompositeError> {
        let w = Self { w_rgb, w_us, w_pred };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), CompositeError> {
        if [self.w_rgb, self.w_us, self.w_pred].iter().all(|v| (0.0..=1.0).contains(v)) {
            Ok(())
        } else {
            Err(CompositeError::InvalidWeights(*self))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    /// Weighted sum, clamped to 255.
    #[default]
    Additive,
    /// Layers painted in order, each with opacity equal to its weight.
    SourceOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompositeStyle {
    pub mode: BlendMode,
    pub pred_color: [u8; 3],
    pub guideline_color: [u8; 3],
    pub guideline_width: f64,
}

impl Default for CompositeStyle {
    fn default() -> Self {
        Self {
            mode: BlendMode::Additive,
            pred_color: [255, 255, 255],
            guideline_color: [255, 0, 0],
            guideline_width: 2.0,
        }
    }
}

fn check(layer: &'static str, expected: FrameDims, actual: FrameDims) -> Result<(), CompositeError> {
    if expected == actual {
        Ok(())
    } else {
        Err(CompositeError::DimsMismatch { layer, expected, actual })
    }
}

/// Distance from `p` to the segment `a`-`b`.
fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len_sq = d.x * d.x + d.y * d.y;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * d.x + (p.y - a.y) * d.y) / len_sq).clamp(0.0, 1.0)
    };
    p.distance(a + d * t)
}

/// Paints pixels whose centers lie within half the line width of the segment.
fn draw_segment(buf: &mut [u8], dims: FrameDims, a: Point2, b: Point2, width: f64, color: [u8; 3]) {
    let r = width / 2.0;
    let x0 = (a.x.min(b.x) - r).floor().max(0.0) as u32;
    let y0 = (a.y.min(b.y) - r).floor().max(0.0) as u32;
    let x1 = ((a.x.max(b.x) + r).ceil().max(0.0) as u32).min(dims.width);
    let y1 = ((a.y.max(b.y) + r).ceil().max(0.0) as u32).min(dims.height);
    for y in y0..y1 {
        for x in x0..x1 {
            let c = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            if segment_distance(c, a, b) <= r {
                let i = (y * dims.width + x) as usize * 3;
                buf[i..i + 3].copy_from_slice(&color);
            }
        }
    }
}

/// Produces the RGB8 feedback frame on the camera canvas.
///
/// The ultrasound and prediction layers contribute only where their alpha is
/// set. The prediction intensity scales `style.pred_color`. With
/// `guideline`, a segment is drawn between the two marker points on top.
pub fn composite(
    rgb: &ImageFrame,
    us: &WarpedImage,
    pred: &WarpedImage,
    weights: &BlendWeights,
    style: &CompositeStyle,
    guideline: Option<(Point2, Point2)>,
) -> Result<ImageFrame, CompositeError> {
    weights.validate()?;
    let dims = rgb.dims();
    check("ultrasound layer", dims, us.image.dims())?;
    check("prediction layer", dims, pred.image.dims())?;

    let (us_c, pred_c, rgb_c) = (us.image.channels(), pred.image.channels(), rgb.channels());
    let (us_px, pred_px, rgb_px) = (us.image.payload(), pred.image.payload(), rgb.payload());
    let mut out = Vec::with_capacity(dims.pixel_count() * 3);
    for i in 0..dims.pixel_count() {
        let us_on = us.alpha[i] != 0;
        let pred_on = pred.alpha[i] != 0;
        for ch in 0..3 {
            let base = rgb_px[i * rgb_c + ch.min(rgb_c - 1)] as f64;
            let u = us_px[i * us_c + ch.min(us_c - 1)] as f64;
            let p = pred_px[i * pred_c + ch.min(pred_c - 1)] as f64 / 255.0 * style.pred_color[ch] as f64;
            let v = match style.mode {
                BlendMode::Additive => {
                    let mut v = weights.w_rgb * base;
                    if us_on {
                        v += weights.w_us * u;
                    }
                    if pred_on {
                        v += weights.w_pred * p;
                    }
                    v
                }
                BlendMode::SourceOver => {
                    let mut v = weights.w_rgb * base;
                    if us_on {
                        v += (u - v) * weights.w_us * us.alpha[i] as f64 / 255.0;
                    }
                    if pred_on {
                        let a = weights.w_pred * pred.alpha[i] as f64 / 255.0
                            * pred_px[i * pred_c + ch.min(pred_c - 1)] as f64
                            / 255.0;
                        v += (style.pred_color[ch] as f64 - v) * a;
                    }
                    v
                }
            };
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    if let Some((a, b)) = guideline {
        draw_segment(&mut out, dims, a, b, style.guideline_width, style.guideline_color);
    }
    Ok(ImageFrame::new(StreamId::Composite, rgb.timestamp_us, dims.width, dims.height, PixelFormat::Rgb8, out)
        .expect("output sized from dims"))
}
