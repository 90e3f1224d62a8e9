use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::TongueContour;

/// One contour line of a `contours.jsonl` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRecord {
    pub frame_index: u64,
    pub bundle_ts_us: u64,
    #[serde(flatten)]
    pub contour: TongueContour,
}

/// `frame_index,point_index,x,y` rows with a header line.
pub fn write_contours_csv<W: Write>(out: W, records: &[ContourRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame_index", "point_index", "x", "y"])?;
    for rec in records {
        for (i, p) in rec.contour.points.iter().enumerate() {
            w.write_record([
                rec.frame_index.to_string(),
                i.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_contours_jsonl<R: BufRead>(input: R) -> Result<Vec<ContourRecord>, serde_json::Error> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
