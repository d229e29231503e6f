//! Mobility trace CSV:
//! `time_ms,vehicle_id,x_m,y_m,speed_mps,heading_deg[,accel_mps2,lat,lon]`.

use std::io::{Read, Write};
use std::path::Path;

use cv2x_core::mobility::{TraceRecord, TrackSet};

use crate::bler::csv_error;
use crate::error::{Error, Result};

const REQUIRED: [&str; 6] = ["time_ms", "vehicle_id", "x_m", "y_m", "speed_mps", "heading_deg"];
const OPTIONAL: [&str; 3] = ["accel_mps2", "lat", "lon"];

pub fn read_trace<R: Read>(reader: R, origin: &Path) -> Result<TrackSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(origin, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let header_ok = cols.len() >= REQUIRED.len()
        && cols[..REQUIRED.len()] == REQUIRED
        && cols[REQUIRED.len()..].iter().all(|c| OPTIONAL.contains(c));
    if !header_ok {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            msg: format!(
                "header must be `{}` optionally followed by {}; found `{}`",
                REQUIRED.join(","),
                OPTIONAL.join(", "),
                cols.join(",")
            ),
        });
    }
    let mut records = Vec::new();
    for rec in rdr.deserialize::<TraceRecord>() {
        let rec = rec.map_err(|e| csv_error(origin, e))?;
        if !(rec.x_m.is_finite() && rec.y_m.is_finite() && rec.speed_mps.is_finite()) {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                msg: format!("non-finite value for vehicle {} at {} ms", rec.vehicle_id, rec.time_ms),
            });
        }
        records.push(rec);
    }
    TrackSet::from_records(records).map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn load_trace_csv(path: &Path) -> Result<TrackSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(std::io::BufReader::new(file), path)
}

/// Writes records with the full optional column set.
pub fn write_trace<W: Write>(writer: W, records: &[TraceRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()
}
