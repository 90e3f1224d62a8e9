use std::path::{Path, PathBuf};

use crate::session_io::{SessionError, SessionReader};
use crate::tongue_contour::{contour_distances, ContourDistances, ContourRecord, TongueContour};

/// Contours of a recorded session, replayed against live bundles.
///
/// The track is aligned by elapsed time: the first live bundle after
/// selection lines up with the first recorded contour, and the track loops
/// when the live session outlasts it.
#[derive(Debug, Clone)]
pub struct ReferenceTrack {
    dir: PathBuf,
    records: Vec<ContourRecord>,
    period_us: u64,
    start_live_us: Option<u64>,
}

impl ReferenceTrack {
    pub fn load(dir: &Path) -> Result<Self, SessionError> {
        let records = SessionReader::open(dir)?.read_contours()?;
        Ok(Self::from_records(dir.to_path_buf(), records))
    }

    pub fn from_records(dir: PathBuf, mut records: Vec<ContourRecord>) -> Self {
        records.sort_by_key(|r| r.bundle_ts_us);
        let period_us = match (records.first(), records.last()) {
            (Some(a), Some(b)) if records.len() > 1 => {
                let span = b.bundle_ts_us - a.bundle_ts_us;
                span + span / (records.len() as u64 - 1)
            }
            _ => 0,
        };
        Self {
            dir,
            records,
            period_us,
            start_live_us: None,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Recorded contour matched to the live bundle at `live_ts_us`.
    pub fn contour_at(&mut self, live_ts_us: u64) -> Option<&ContourRecord> {
        let first = self.records.first()?.bundle_ts_us;
        let start = *self.start_live_us.get_or_insert(live_ts_us);
        let elapsed = live_ts_us.saturating_sub(start);
        let offset = if self.period_us == 0 { 0 } else { elapsed % self.period_us };
        let target = first + offset;
        let idx = self.records.partition_point(|r| r.bundle_ts_us <= target);
        self.records.get(idx.saturating_sub(1))
    }
}

/// Distances between the live and the reference contour, or `None` when
/// either is empty.
pub fn compare_with_reference(live: &TongueContour, reference: &TongueContour) -> Option<ContourDistances> {
    contour_distances(live, reference).ok()
}
