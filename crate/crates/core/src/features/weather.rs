use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{csv_err, csv_io, format_timestamp, parse_timestamp, Timestamp};

pub const WEATHER_NUMERIC_COLUMNS: [&str; 5] = ["temp", "feels_like", "wind", "precip", "clouds"];

/// One hourly weather observation; `None` marks a missing field.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherRecord {
    pub timestamp: Timestamp,
    pub numeric: [Option<f64>; 5],
    pub description: Option<String>,
}

/// Ordered set of single-word weather descriptions used for one-hot encoding.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeatherVocab {
    words: Vec<String>,
}

impl WeatherVocab {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        WeatherVocab { words: words.into_iter().map(Into::into).collect() }
    }

    /// Sorted distinct descriptions among records before `until`.
    pub fn from_records(records: &[WeatherRecord], until: &Timestamp) -> Self {
        let set: BTreeSet<&str> = records
            .iter()
            .filter(|r| r.timestamp < *until)
            .filter_map(|r| r.description.as_deref())
            .collect();
        WeatherVocab::new(set)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Numeric fields (forward-filled from `prev`, 0 without history) followed by the one-hot
/// description block. Unknown descriptions encode as all zeros.
pub fn encode_weather(record: &WeatherRecord, vocab: &WeatherVocab, prev: Option<&[f64; 5]>) -> Vec<f64> {
    let mut out = Vec::with_capacity(5 + vocab.len());
    for (k, v) in record.numeric.iter().enumerate() {
        out.push(v.unwrap_or_else(|| prev.map_or(0.0, |p| p[k])));
    }
    for w in vocab.words() {
        out.push((record.description.as_deref() == Some(w.as_str())) as u8 as f64);
    }
    out
}

/// Encodes `hours` rows on the grid starting at `start`; hours without a record behave as
/// fully missing.
pub fn weather_matrix(
    records: &[WeatherRecord],
    vocab: &WeatherVocab,
    start: Timestamp,
    hours: usize,
) -> Vec<Vec<f64>> {
    let by_time: HashMap<Timestamp, &WeatherRecord> = records.iter().map(|r| (r.timestamp, r)).collect();
    let mut prev: Option<[f64; 5]> = None;
    let mut out = Vec::with_capacity(hours);
    for t in 0..hours {
        let ts = start + chrono::Duration::hours(t as i64);
        let missing = WeatherRecord { timestamp: ts, numeric: [None; 5], description: None };
        let rec = by_time.get(&ts).copied().unwrap_or(&missing);
        let row = encode_weather(rec, vocab, prev.as_ref());
        prev = Some(row[..5].try_into().unwrap());
        out.push(row);
    }
    out
}

/// Reads `timestamp,temp,feels_like,wind,precip,clouds,description`; empty cells are missing.
pub fn read_weather(path: &Path) -> Result<Vec<WeatherRecord>> {
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(&file, e))?;
        if rec.len() != 7 {
            return Err(Error::parse(&file, line, "expected 7 fields"));
        }
        let timestamp = parse_timestamp(&rec[0])
            .ok_or_else(|| Error::parse(&file, line, format!("bad timestamp {:?}", &rec[0])))?;
        let mut numeric = [None; 5];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let s = rec[k + 1].trim();
            if !s.is_empty() {
                *slot = Some(s.parse().map_err(|_| Error::parse(&file, line, format!("bad number {s:?}")))?);
            }
        }
        let d = rec[6].trim();
        out.push(WeatherRecord {
            timestamp,
            numeric,
            description: (!d.is_empty()).then(|| d.to_string()),
        });
    }
    Ok(out)
}

pub fn write_weather(path: &Path, records: &[WeatherRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["timestamp", "temp", "feels_like", "wind", "precip", "clouds", "description"])
        .map_err(|e| csv_io(path, e))?;
    for r in records {
        let mut row = vec![format_timestamp(&r.timestamp)];
        row.extend(r.numeric.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        row.push(r.description.clone().unwrap_or_default());
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn rec(desc: &str, temp: Option<f64>) -> WeatherRecord {
        WeatherRecord {
            timestamp: Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap(),
            numeric: [temp, Some(1.0), Some(2.0), Some(0.0), Some(50.0)],
            description: Some(desc.into()),
        }
    }

    #[test]
    fn one_hot_snow() {
        let vocab = WeatherVocab::new(["Clear", "Rain", "Snow"]);
        let v = encode_weather(&rec("Snow", Some(-2.0)), &vocab, None);
        assert_eq!(&v[5..], &[0.0, 0.0, 1.0]);
        assert_eq!(v[0], -2.0);
    }

    #[test]
    fn unknown_description_is_zero_block() {
        let vocab = WeatherVocab::new(["Clear", "Rain", "Snow"]);
        let v = encode_weather(&rec("Fog", Some(1.0)), &vocab, None);
        assert_eq!(&v[5..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_temperature_is_forward_filled() {
        let vocab = WeatherVocab::new(["Clear"]);
        let prev = [5.0, 4.0, 3.0, 2.0, 1.0];
        let v = encode_weather(&rec("Clear", None), &vocab, Some(&prev));
        assert_eq!(v[0], 5.0);
        let v = encode_weather(&rec("Clear", None), &vocab, None);
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn matrix_fills_absent_hours() {
        let vocab = WeatherVocab::new(["Clear"]);
        let r = rec("Clear", Some(7.0));
        let m = weather_matrix(&[r.clone()], &vocab, r.timestamp, 3);
        assert_eq!(m[2][0], 7.0);
        assert_eq!(m[2][5], 0.0);
    }
}
