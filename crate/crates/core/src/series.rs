//! Hourly count matrices on a fixed UTC grid.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Timelike, Utc};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// Parses an ISO-8601 / RFC 3339 timestamp, accepting a bare `YYYY-MM-DDTHH:MM:SS` as UTC.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&t));
        }
    }
    None
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn is_hour_aligned(t: &Timestamp) -> bool {
    t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

/// Truncates a timestamp down to the start of its hour.
pub fn floor_hour(t: &Timestamp) -> Timestamp {
    Utc.timestamp_opt(t.timestamp().div_euclid(3600) * 3600, 0).unwrap()
}

/// A T×C matrix of values indexed by consecutive UTC hours starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub start: Timestamp,
    pub columns: Vec<String>,
    /// Row-major, `len() * columns.len()` entries.
    pub values: Vec<f64>,
}

impl HourlySeries {
    pub fn zeros(start: Timestamp, hours: usize, columns: Vec<String>) -> Self {
        let values = vec![0.0; hours * columns.len()];
        HourlySeries { start, columns, values }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.values.len() / self.columns.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.width();
        &self.values[t * w..(t + 1) * w]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.values[t * w..(t + 1) * w]
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.values[t * self.width() + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|t| self.get(t, c)).collect()
    }

    pub fn timestamp(&self, t: usize) -> Timestamp {
        self.start + Duration::hours(t as i64)
    }

    pub fn end(&self) -> Timestamp {
        self.timestamp(self.len())
    }

    /// Hour index of `ts` on this grid, if it falls inside it.
    pub fn index_of(&self, ts: &Timestamp) -> Option<usize> {
        let diff = ts.signed_duration_since(self.start).num_seconds();
        if diff < 0 || diff % 3600 != 0 {
            return None;
        }
        let idx = (diff / 3600) as usize;
        (idx < self.len()).then_some(idx)
    }

    /// Reads `timestamp_iso8601,col_0,...` CSV. Rows must be consecutive hours; gaps are
    /// filled with zeros.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(&name, e))?;
        let headers = rdr.headers().map_err(|e| csv_err(&name, e))?.clone();
        if headers.len() < 1 {
            return Err(Error::parse(&name, 1, "missing header"));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut rows: Vec<(Timestamp, Vec<f64>)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| csv_err(&name, e))?;
            if rec.len() != columns.len() + 1 {
                return Err(Error::parse(&name, line, "wrong number of fields"));
            }
            let ts = parse_timestamp(&rec[0])
                .ok_or_else(|| Error::parse(&name, line, format!("bad timestamp {:?}", &rec[0])))?;
            if !is_hour_aligned(&ts) {
                return Err(Error::parse(&name, line, "timestamp not hour-aligned"));
            }
            let vals = rec
                .iter()
                .skip(1)
                .map(|v| {
                    let v = v.trim();
                    if v.is_empty() {
                        Ok(0.0)
                    } else {
                        v.parse::<f64>()
                            .map_err(|_| Error::parse(&name, line, format!("bad number {v:?}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some((prev, _)) = rows.last() {
                if ts <= *prev {
                    return Err(Error::parse(&name, line, "timestamps not increasing"));
                }
            }
            rows.push((ts, vals));
        }
        let Some((start, _)) = rows.first().cloned() else {
            return Err(Error::parse(&name, 2, "no data rows"));
        };
        let hours = ((rows.last().unwrap().0 - start).num_hours() + 1) as usize;
        let mut out = HourlySeries::zeros(start, hours, columns);
        for (ts, vals) in rows {
            let idx = out.index_of(&ts).expect("row on grid");
            out.row_mut(idx).copy_from_slice(&vals);
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for t in 0..self.len() {
            let mut rec = vec![format_timestamp(&self.timestamp(t))];
            rec.extend(self.row(t).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_err(file: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(file, line, e.to_string())
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::io(path, err),
        other => Error::parse(path.display().to_string(), 0, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_fills_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(
            &p,
            "timestamp_iso8601,poi_0,poi_1\n2019-01-01T00:00:00Z,1,2\n2019-01-01T02:00:00Z,3,4\n",
        )
        .unwrap();
        let s = HourlySeries::read_csv(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.row(1), &[0.0, 0.0]);
        assert_eq!(s.row(2), &[3.0, 4.0]);
        let q = dir.path().join("d.csv");
        s.write_csv(&q).unwrap();
        assert_eq!(HourlySeries::read_csv(&q).unwrap(), s);
    }

    #[test]
    fn rejects_unaligned_timestamp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "timestamp,poi_0\n2019-01-01T00:30:00Z,1\n").unwrap();
        assert!(HourlySeries::read_csv(&p).is_err());
    }
}
