use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use super::StreetGraph;
use crate::error::{Error, Result};
use crate::series::{
    csv_err, csv_io, floor_hour, format_timestamp, is_hour_aligned, parse_timestamp, HourlySeries,
    Timestamp,
};

/// One anonymized location record.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoPing {
    pub device: String,
    pub timestamp: Timestamp,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone)]
pub struct BinnedPings {
    /// N×T counts with one column per graph node, in node order.
    pub counts: HourlySeries,
    /// Pings outside the requested span.
    pub skipped: usize,
}

/// Maps each ping to its nearest node and counts distinct devices per (node, hour).
pub fn bin_geolocations(
    graph: &StreetGraph,
    pings: &[GeoPing],
    start: Timestamp,
    hours: usize,
) -> Result<BinnedPings> {
    if hours == 0 {
        return Err(Error::Invalid("empty binning span".into()));
    }
    if !is_hour_aligned(&start) {
        return Err(Error::Invalid("binning span must start on an hour".into()));
    }
    if graph.node_count() == 0 {
        return Err(Error::Invalid("cannot bin pings on an empty graph".into()));
    }
    let columns = graph.nodes().iter().map(|n| format!("node_{}", n.id)).collect();
    let mut counts = HourlySeries::zeros(start, hours, columns);
    // nearest-node lookups are independent; the reduction below stays sequential
    let located: Vec<Option<(usize, usize)>> = pings
        .par_iter()
        .map(|p| {
            let hour = counts.index_of(&floor_hour(&p.timestamp))?;
            Some((hour, graph.nearest_index(p.lat, p.lon)))
        })
        .collect();
    let mut seen: HashSet<(&str, usize, usize)> = HashSet::new();
    let mut skipped = 0;
    let n = graph.node_count();
    for (p, loc) in pings.iter().zip(located) {
        match loc {
            None => skipped += 1,
            Some((hour, node)) => {
                if seen.insert((p.device.as_str(), node, hour)) {
                    counts.values[hour * n + node] += 1.0;
                }
            }
        }
    }
    Ok(BinnedPings { counts, skipped })
}

/// Reads `device_id,timestamp_iso8601,lat,lon`.
pub fn read_pings(path: &Path) -> Result<Vec<GeoPing>> {
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(&file, e))?;
        if rec.len() < 4 {
            return Err(Error::parse(&file, line, "expected 4 fields"));
        }
        let timestamp = parse_timestamp(&rec[1])
            .ok_or_else(|| Error::parse(&file, line, format!("bad timestamp {:?}", &rec[1])))?;
        let lat: f64 = rec[2].trim().parse().map_err(|_| Error::parse(&file, line, "bad lat"))?;
        let lon: f64 = rec[3].trim().parse().map_err(|_| Error::parse(&file, line, "bad lon"))?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::parse(&file, line, "coordinate out of range"));
        }
        out.push(GeoPing { device: rec[0].to_string(), timestamp, lat, lon });
    }
    Ok(out)
}

pub fn write_pings(path: &Path, pings: &[GeoPing]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["device_id", "timestamp_iso8601", "lat", "lon"])
        .map_err(|e| csv_io(path, e))?;
    for p in pings {
        w.write_record([
            p.device.clone(),
            format_timestamp(&p.timestamp),
            p.lat.to_string(),
            p.lon.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
