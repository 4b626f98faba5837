//! Result files.
//!
//! Record CSV has one row per (drop, scheme, user) with the fixed columns in
//! [`RECORD_COLUMNS`]. Floats are written in Rust's shortest round-trip form,
//! so statistics recomputed from a CSV match those of the in-memory records
//! bit for bit. `wall_ms` is empty unless timing was requested. JSON output is
//! the serde form of `Vec<ResultRecord>` and includes per-drop error messages.

use std::io::{Read, Write};

use cellfree_otfs_core::pipeline::AllocationScheme;

use crate::error::HarnessError;
use crate::runner::{RecordStatus, ResultRecord};
use crate::stats::CdfStats;

pub const RECORD_COLUMNS: [&str; 10] = [
    "drop",
    "seed",
    "scheme",
    "user",
    "se_bits",
    "min_se",
    "status",
    "bis_iters",
    "sca_iters",
    "wall_ms",
];

pub fn write_records_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        let wall = r.wall_ms.map(|v| v.to_string()).unwrap_or_default();
        for (user, se) in r.se.iter().enumerate() {
            w.write_record([
                r.drop.to_string(),
                r.seed.to_string(),
                r.scheme.name().to_string(),
                user.to_string(),
                se.to_string(),
                r.min_se.to_string(),
                r.status.name().to_string(),
                r.bis_iters.to_string(),
                r.sca_iters.to_string(),
                wall.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T, HarnessError> {
    let raw = row
        .get(i)
        .ok_or_else(|| HarnessError::Format(format!("missing column {}", RECORD_COLUMNS[i])))?;
    raw.parse()
        .map_err(|_| HarnessError::Format(format!("bad {} value {raw:?}", RECORD_COLUMNS[i])))
}

/// Rebuilds records from a record CSV. Error messages are not stored in CSV
/// and come back as `None`.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<ResultRecord>, HarnessError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(RECORD_COLUMNS) {
        return Err(HarnessError::Format(format!("unexpected header {header:?}")));
    }
    let mut records: Vec<ResultRecord> = Vec::new();
    for row in rd.records() {
        let row = row?;
        let drop: usize = field(&row, 0)?;
        let seed: u64 = field(&row, 1)?;
        let scheme_name: String = field(&row, 2)?;
        let scheme = AllocationScheme::from_name(&scheme_name)
            .ok_or_else(|| HarnessError::Format(format!("unknown scheme {scheme_name}")))?;
        let user: usize = field(&row, 3)?;
        let se: f64 = field(&row, 4)?;
        let status_name: String = field(&row, 6)?;
        let status = RecordStatus::from_name(&status_name)
            .ok_or_else(|| HarnessError::Format(format!("unknown status {status_name}")))?;
        let wall_raw = row.get(9).unwrap_or("");
        let wall_ms = if wall_raw.is_empty() {
            None
        } else {
            Some(field(&row, 9)?)
        };

        let continues = records
            .last()
            .is_some_and(|r| r.drop == drop && r.scheme == scheme && r.se.len() == user);
        if continues {
            records.last_mut().expect("checked above").se.push(se);
        } else if user == 0 {
            records.push(ResultRecord {
                drop,
                seed,
                scheme,
                se: vec![se],
                min_se: field(&row, 5)?,
                status,
                bis_iters: field(&row, 7)?,
                sca_iters: field(&row, 8)?,
                wall_ms,
                error: None,
            });
        } else {
            return Err(HarnessError::Format(format!("user {user} out of order in drop {drop}")));
        }
    }
    Ok(records)
}

pub fn write_records_json<W: Write>(records: &[ResultRecord], out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(out, records)?;
    Ok(())
}

pub fn read_records_json<R: Read>(input: R) -> Result<Vec<ResultRecord>, HarnessError> {
    Ok(serde_json::from_reader(input)?)
}

/// Percentile table with columns `label, samples, mean, p5, p10, ...`.
pub fn write_summary_csv<W: Write>(rows: &[(String, &CdfStats)], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string(), "samples".into(), "mean".into()];
    if let Some((_, s)) = rows.first() {
        header.extend(s.percentiles.iter().map(|(p, _)| format!("p{p}")));
    }
    w.write_record(&header)?;
    for (label, s) in rows {
        let mut rec = vec![label.clone(), s.samples.to_string(), s.mean.to_string()];
        rec.extend(s.percentiles.iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
