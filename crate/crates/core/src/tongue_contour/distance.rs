use serde::{Deserialize, Serialize};

use super::{ContourError, TongueContour};
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Mean sum of distances: symmetric average nearest-point distance.
    Msd,
    Hausdorff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourDistances {
    pub msd: f64,
    pub hausdorff: f64,
}

/// Nearest distance from `p` into `sorted` (sorted by x), scanning outward
/// from p's x position and stopping once the x gap alone exceeds the best.
fn nearest(p: Point2, sorted: &[Point2]) -> f64 {
    let start = sorted.partition_point(|q| q.x < p.x);
    let mut best_sq = f64::INFINITY;
    for q in &sorted[start..] {
        let dx = q.x - p.x;
        if dx * dx >= best_sq {
            break;
        }
        best_sq = best_sq.min(dx * dx + (q.y - p.y).powi(2));
    }
    for q in sorted[..start].iter().rev() {
        let dx = p.x - q.x;
        if dx * dx >= best_sq {
            break;
        }
        best_sq = best_sq.min(dx * dx + (q.y - p.y).powi(2));
    }
    best_sq.sqrt()
}

/// Sum and max of nearest distances from every point of `from` into `to`.
fn directed(from: &[Point2], to: &[Point2]) -> (f64, f64) {
    let mut sorted = to.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    from.iter().map(|&p| nearest(p, &sorted)).fold((0.0, 0.0), |(s, m), d| (s + d, m.max(d)))
}

/// Both metrics in one pass.
pub fn contour_distances(a: &TongueContour, b: &TongueContour) -> Result<ContourDistances, ContourError> {
    if a.is_empty() || b.is_empty() {
        return Err(ContourError::EmptyContour);
    }
    let (sum_ab, max_ab) = directed(&a.points, &b.points);
    let (sum_ba, max_ba) = directed(&b.points, &a.points);
    Ok(ContourDistances {
        msd: (sum_ab + sum_ba) / (a.len() + b.len()) as f64,
        hausdorff: max_ab.max(max_ba),
    })
}

/// Point-set distance between two contours, in pixels.
pub fn contour_distance(a: &TongueContour, b: &TongueContour, metric: DistanceMetric) -> Result<f64, ContourError> {
    let d = contour_distances(a, b)?;
    Ok(match metric {
        DistanceMetric::Msd => d.msd,
        DistanceMetric::Hausdorff => d.hausdorff,
    })
}
