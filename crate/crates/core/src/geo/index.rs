//! Uniform lat/lon grid index for nearest-node queries.

use std::collections::HashMap;

use super::graph::Node;
use super::{haversine_m, EARTH_RADIUS_M};

const CELL_M: f64 = 200.0;

#[derive(Debug, Clone)]
pub(crate) struct GridIndex {
    lat0: f64,
    lon0: f64,
    dlat: f64,
    dlon: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    pub(crate) fn build(nodes: &[Node]) -> Self {
        let lat0 = nodes.iter().map(|n| n.lat).fold(f64::INFINITY, f64::min);
        let lon0 = nodes.iter().map(|n| n.lon).fold(f64::INFINITY, f64::min);
        let lat_max = nodes.iter().map(|n| n.lat.abs()).fold(0.0, f64::max);
        let dlat = (CELL_M / EARTH_RADIUS_M).to_degrees();
        let dlon = dlat / lat_max.to_radians().cos().max(0.01);
        let mut idx = GridIndex {
            lat0: if lat0.is_finite() { lat0 } else { 0.0 },
            lon0: if lon0.is_finite() { lon0 } else { 0.0 },
            dlat,
            dlon,
            cells: HashMap::new(),
        };
        for (i, n) in nodes.iter().enumerate() {
            let c = idx.cell(n.lat, n.lon);
            idx.cells.entry(c).or_default().push(i);
        }
        idx
    }

    fn cell(&self, lat: f64, lon: f64) -> (i64, i64) {
        (
            ((lat - self.lat0) / self.dlat).floor() as i64,
            ((lon - self.lon0) / self.dlon).floor() as i64,
        )
    }

    /// Searches the 3×3 block around the query cell and accepts the result only when it
    /// is strictly closer than anything outside the block can be; otherwise scans all.
    pub(crate) fn nearest(&self, nodes: &[Node], lat: f64, lon: f64) -> usize {
        let (ci, cj) = self.cell(lat, lon);
        let mut best: Option<(f64, u64, usize)> = None;
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(list) = self.cells.get(&(ci + di, cj + dj)) {
                    for &i in list {
                        consider(&mut best, nodes, i, lat, lon);
                    }
                }
            }
        }
        if let Some((d, _, i)) = best {
            if d < self.block_margin(ci, cj, lat, lon) {
                return i;
            }
        }
        let mut best = None;
        for i in 0..nodes.len() {
            consider(&mut best, nodes, i, lat, lon);
        }
        best.expect("nonempty graph").2
    }

    /// Lower bound on the distance from the query to any point outside the 3×3 block.
    fn block_margin(&self, ci: i64, cj: i64, lat: f64, lon: f64) -> f64 {
        let lat_lo = self.lat0 + (ci - 1) as f64 * self.dlat;
        let lat_hi = self.lat0 + (ci + 2) as f64 * self.dlat;
        let lon_lo = self.lon0 + (cj - 1) as f64 * self.dlon;
        let lon_hi = self.lon0 + (cj + 2) as f64 * self.dlon;
        if lat_lo < -90.0 || lat_hi > 90.0 {
            return 0.0;
        }
        let dphi = (lat - lat_lo).min(lat_hi - lat).max(0.0).to_radians();
        let lat_margin = EARTH_RADIUS_M * dphi;
        // inside the latitude band both cosines are at least cos_min
        let cos_min = lat_lo.to_radians().cos().min(lat_hi.to_radians().cos()).max(0.0);
        let dlam = (lon - lon_lo).min(lon_hi - lon).max(0.0).to_radians();
        let lon_margin = 2.0 * EARTH_RADIUS_M * (cos_min * (dlam / 2.0).min(std::f64::consts::FRAC_PI_2).sin()).asin();
        lat_margin.min(lon_margin) * (1.0 - 1e-9)
    }
}

fn consider(best: &mut Option<(f64, u64, usize)>, nodes: &[Node], i: usize, lat: f64, lon: f64) {
    let n = &nodes[i];
    let d = haversine_m(lat, lon, n.lat, n.lon);
    let better = match best {
        None => true,
        Some((bd, bid, _)) => d < *bd || (d == *bd && n.id < *bid),
    };
    if better {
        *best = Some((d, n.id, i));
    }
}
