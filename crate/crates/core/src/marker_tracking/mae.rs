use serde::{Deserialize, Serialize};

use super::{KeypointPair, TrackingError};
use crate::geometry::FrameDims;

/// Keypoint error summary. Coordinates are normalized by the frame width
/// (x) and height (y), so values are unitless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub mean: f64,
    /// Population standard deviation of the per-pair errors.
    pub std: f64,
    pub per_pair: Vec<f64>,
}

/// Mean absolute error over the four coordinates of each pair.
pub fn evaluate_mae(pred: &[KeypointPair], truth: &[KeypointPair], norm: FrameDims) -> Result<MaeReport, TrackingError> {
    if pred.len() != truth.len() {
        return Err(TrackingError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(TrackingError::EmptyEvaluation);
    }
    if norm.width == 0 || norm.height == 0 {
        return Err(TrackingError::InvalidNorm(norm));
    }
    let (w, h) = (norm.width as f64, norm.height as f64);
    let per_pair: Vec<f64> = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            ((p.m1.x - t.m1.x).abs() / w
                + (p.m1.y - t.m1.y).abs() / h
                + (p.m2.x - t.m2.x).abs() / w
                + (p.m2.y - t.m2.y).abs() / h)
                / 4.0
        })
        .collect();
    let n = per_pair.len() as f64;
    let mean = per_pair.iter().sum::<f64>() / n;
    let std = (per_pair.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(MaeReport { mean, std, per_pair })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn pair(a: (f64, f64), b: (f64, f64)) -> KeypointPair {
        KeypointPair::new(Point2::new(a.0, a.1), Point2::new(b.0, b.1), 1.0)
    }

    #[test]
    fn perfect_prediction() {
        let t = vec![pair((10.0, 20.0), (30.0, 40.0)); 3];
        let r = evaluate_mae(&t, &t, FrameDims::new(640, 480)).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn constant_normalized_offset() {
        let dims = FrameDims::new(200, 100);
        let t = pair((50.0, 50.0), (150.0, 60.0));
        // 0.01 of width is 2 px, 0.01 of height is 1 px
        let p = pair((52.0, 49.0), (148.0, 61.0));
        let r = evaluate_mae(&[p], &[t], dims).unwrap();
        assert!((r.mean - 0.01).abs() < 1e-15);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn ten_pairs_against_spreadsheet_recomputation() {
        let dims = FrameDims::new(100, 50);
        // per-coordinate pixel errors for each pair: (dx1, dy1, dx2, dy2)
        let errs: [(f64, f64, f64, f64); 10] = [
            (1.0, 0.5, 2.0, 0.0),
            (0.0, 0.0, 0.0, 0.0),
            (3.0, 1.0, 1.0, 2.0),
            (0.5, 0.5, 0.5, 0.5),
            (10.0, 0.0, 0.0, 5.0),
            (2.0, 2.0, 2.0, 2.0),
            (0.0, 4.0, 0.0, 0.0),
            (1.5, 0.25, 0.75, 1.0),
            (6.0, 3.0, 0.0, 1.0),
            (0.2, 0.1, 0.4, 0.3),
        ];
        let truth: Vec<_> = (0..10).map(|i| pair((10.0 + i as f64, 10.0), (60.0, 20.0 + i as f64))).collect();
        let pred: Vec<_> = truth
            .iter()
            .zip(errs)
            .enumerate()
            .map(|(i, (t, (a, b, c, d)))| {
                // alternate signs; absolute error is what counts
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                pair((t.m1.x + s * a, t.m1.y - s * b), (t.m2.x - s * c, t.m2.y + s * d))
            })
            .collect();
        // independent recomputation: row means then mean / population std
        let rows: Vec<f64> = errs
            .iter()
            .map(|(a, b, c, d)| (a / 100.0 + b / 50.0 + c / 100.0 + d / 50.0) / 4.0)
            .collect();
        let mut total = 0.0;
        for r in &rows {
            total += r;
        }
        let mean = total / 10.0;
        let mut sq = 0.0;
        for r in &rows {
            sq += (r - mean) * (r - mean);
        }
        let std = (sq / 10.0).sqrt();

        let report = evaluate_mae(&pred, &truth, dims).unwrap();
        assert!((report.mean - mean).abs() < 1e-12);
        assert!((report.std - std).abs() < 1e-12);

        let mut rev_p = pred.clone();
        let mut rev_t = truth.clone();
        rev_p.reverse();
        rev_t.reverse();
        let rev = evaluate_mae(&rev_p, &rev_t, dims).unwrap();
        assert!((rev.mean - report.mean).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        let t = vec![pair((1.0, 1.0), (2.0, 2.0))];
        assert_eq!(
            evaluate_mae(&t, &[], FrameDims::new(1, 1)),
            Err(TrackingError::LengthMismatch { pred: 1, truth: 0 })
        );
    }
}
