//! Street graphs: loading, spatial lookup, POI attachment, normalized adjacency and
//! geolocation binning.

mod adjacency;
mod binning;
mod graph;
mod index;

pub use adjacency::{normalized_adjacency, NormalizedAdjacency};
pub use binning::{bin_geolocations, read_pings, write_pings, BinnedPings, GeoPing};
pub use graph::{
    attach_pois, load_street_graph, read_pois, write_pois, Edge, Node, Poi, StreetGraph,
    MAX_POI_LINKS, POI_LINK_RADIUS_M,
};

/// Mean Earth radius used for every geodesic distance.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance in meters between two (lat, lon) points given in degrees.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_known_distances() {
        assert_eq!(haversine_m(47.8, 13.04, 47.8, 13.04), 0.0);
        // one degree of latitude
        let d = haversine_m(0.0, 0.0, 1.0, 0.0);
        assert!((d - EARTH_RADIUS_M * std::f64::consts::PI / 180.0).abs() < 1e-6);
        let a = haversine_m(47.8, 13.0, 47.81, 13.02);
        let b = haversine_m(47.81, 13.02, 47.8, 13.0);
        assert!((a - b).abs() < 1e-9);
    }
}
