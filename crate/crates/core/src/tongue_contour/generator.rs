//! Synthetic tongue segmentation maps with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ContourError, SegmentationMap, TongueContour};
use crate::geometry::{FrameDims, Point2};

/// Natural cubic spline through points with strictly increasing x.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(points: &[Point2]) -> Option<Self> {
        let n = points.len();
        if n < 2 || points.windows(2).any(|w| !(w[1].x > w[0].x)) {
            return None;
        }
        let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            let mut upper = vec![0.0; m];
            for i in 0..m {
                let (h0, h1) = (xs[i + 1] - xs[i], xs[i + 2] - xs[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..m {
                let lower = xs[i + 1] - xs[i];
                let f = lower / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
            }
        }
        Some(Self { xs, ys, second })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Value at `x`; clamps to the end segments outside the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&v| v <= x).clamp(1, self.xs.len() - 1) - 1;
        let h = self.xs[k + 1] - self.xs[k];
        let a = (self.xs[k + 1] - x) / h;
        let b = (x - self.xs[k]) / h;
        a * self.ys[k]
            + b * self.ys[k + 1]
            + ((a * a * a - a) * self.second[k] + (b * b * b - b) * self.second[k + 1]) * h * h / 6.0
    }
}

/// Parameters of a synthetic tongue band: a bright ribbon whose top edge
/// follows a spline through `control_points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueBandSpec {
    pub frame: FrameDims,
    pub control_points: Vec<Point2>,
    pub band_thickness: f64,
    pub brightness: f64,
    pub speckle_seed: u64,
    pub noise_level: f64,
}

impl TongueBandSpec {
    pub fn shifted(&self, dy: f64) -> TongueBandSpec {
        TongueBandSpec {
            control_points: self.control_points.iter().map(|p| Point2::new(p.x, p.y + dy)).collect(),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<NaturalSpline, ContourError> {
        let bad = |m: String| Err(ContourError::SpecOutOfBounds(m));
        if self.control_points.len() < 3 {
            return bad(format!("need at least 3 control points, got {}", self.control_points.len()));
        }
        if !(self.band_thickness > 0.0) {
            return bad(format!("band thickness must be positive, got {}", self.band_thickness));
        }
        if !(0.0..=1.0).contains(&self.brightness) || !(0.0..=1.0).contains(&self.noise_level) {
            return bad("brightness and noise_level must lie in [0, 1]".into());
        }
        let Some(spline) = NaturalSpline::new(&self.control_points) else {
            return bad("control points must have strictly increasing x".into());
        };
        let (x0, x1) = spline.x_range();
        if x0 < 0.0 || x1 > (self.frame.width - 1) as f64 {
            return bad(format!("control points span x {x0}..{x1} outside the frame"));
        }
        for c in columns(&spline, self.frame) {
            let top = spline.eval(c as f64);
            if top < 0.0 || top + self.band_thickness > self.frame.height as f64 {
                return bad(format!("band leaves the frame at column {c} (top {top:.2})"));
            }
        }
        Ok(spline)
    }
}

const EDGE_EPS: f64 = 1e-9;

fn columns(spline: &NaturalSpline, frame: FrameDims) -> std::ops::RangeInclusive<u32> {
    let (x0, x1) = spline.x_range();
    (x0.ceil().max(0.0) as u32)..=(x1.floor().min((frame.width - 1) as f64) as u32)
}

/// Renders the band into a probability map and returns the analytic top
/// edge (one point per covered column) as ground truth.
///
/// Band pixels take `brightness * (1 + noise * u)` with `u` uniform in
/// [-1, 1] (multiplicative speckle); background pixels take
/// `0.3 * noise * v` with `v` uniform in [0, 1). Both are clamped to [0, 1].
/// One random draw is consumed per pixel in row-major order, so the output
/// depends only on the spec.
pub fn generate_segmentation(spec: &TongueBandSpec) -> Result<(SegmentationMap, TongueContour), ContourError> {
    let spline = spec.validate()?;
    let (w, h) = (spec.frame.width as usize, spec.frame.height as usize);

    let mut top = vec![f64::NAN; w];
    let mut truth = Vec::new();
    for c in columns(&spline, spec.frame) {
        let y = spline.eval(c as f64);
        top[c as usize] = y;
        truth.push(Point2::new(c as f64, y));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.speckle_seed);
    let mut prob = Vec::with_capacity(w * h);
    for r in 0..h {
        let row = r as f64;
        for t in &top {
            let u: f64 = rng.gen();
            // Spline round-off must not push a band sitting on a row boundary down a row.
            let in_band = !t.is_nan() && row >= *t - EDGE_EPS && row < t + spec.band_thickness - EDGE_EPS;
            let p = if in_band {
                spec.brightness * (1.0 + spec.noise_level * (2.0 * u - 1.0))
            } else {
                0.3 * spec.noise_level * u
            };
            prob.push(p.clamp(0.0, 1.0) as f32);
        }
    }
    let map = SegmentationMap::new(spec.frame.width, spec.frame.height, prob)?;
    Ok((
        map,
        TongueContour {
            points: truth,
            source_dims: spec.frame,
        },
    ))
}
