//! `sinr_db,bler` curve files.

use std::path::Path;

use cv2x_core::phy::BlerTable;
use serde::Deserialize;

use crate::error::{Error, Result};

/// MCS 5 curve compiled into the binary.
pub const DEFAULT_MCS5_CSV: &str = include_str!("../data/bler_mcs5.csv");

#[derive(Deserialize)]
struct Row {
    sinr_db: f64,
    bler: f64,
}

pub fn parse_bler_csv(text: &str, mcs: u32, origin: &Path) -> Result<BlerTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| csv_error(origin, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["sinr_db", "bler"] {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            msg: format!("expected header `sinr_db,bler`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut points = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| csv_error(origin, e))?;
        points.push((row.sinr_db, row.bler));
    }
    BlerTable::new(mcs, points).map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn load_bler_csv(path: &Path, mcs: u32) -> Result<BlerTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bler_csv(&text, mcs, path)
}

pub fn default_table() -> BlerTable {
    parse_bler_csv(DEFAULT_MCS5_CSV, 5, Path::new("<built-in>")).expect("built-in BLER table is valid")
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let msg = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    }
}
