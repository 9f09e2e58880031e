//! Deterministic synthetic city: street graph, POIs, hourly visitor counts, geolocation
//! pings, weather and holidays, written in the same formats real data would use.

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{HolidayCalendar, HolidayKind, WeatherRecord};
use crate::geo::{haversine_m, Edge, GeoPing, Node, Poi, StreetGraph};
use crate::series::{HourlySeries, Timestamp};

const CENTER_LAT: f64 = 47.80;
const CENTER_LON: f64 = 13.04;
const SIDE_M: f64 = 2000.0;
const EDGE_RADIUS_M: f64 = 150.0;
/// 4 km/h in meters per minute.
const WALK_M_PER_MIN: f64 = 4000.0 / 60.0;
const PING_EVERY_MIN: i64 = 10;
const METERS_PER_DEG_LAT: f64 = 111_195.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpike {
    pub poi: usize,
    /// Hour index from the span start.
    pub hour: usize,
    pub duration_hours: usize,
    /// Rate added on top of the regular intensity.
    pub extra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub nodes: usize,
    pub pois: usize,
    pub start: Timestamp,
    pub hours: usize,
    /// First hour of the test split, counted from `start`.
    pub split_hour: usize,
    /// Mean hourly visitors per POI at unit multipliers; missing entries are drawn from
    /// the seed.
    pub base_rates: Vec<f64>,
    pub daily: Vec<f64>,
    pub weekly: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub holiday_boost: f64,
    pub rain_factor: f64,
    /// Opening hours `[open, close)` per POI; missing entries are drawn from the seed.
    pub open_hours: Vec<[u32; 2]>,
    /// Weekday (0 = Monday) each POI is closed, if any.
    pub closed_weekday: Vec<Option<u32>>,
    /// POI whose visitors all arrive at 14:00.
    pub sparse_poi: Option<usize>,
    pub events: Vec<EventSpike>,
    /// Random spikes drawn in addition to `events`.
    pub random_events: usize,
    pub coverage: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let daily = (0..24)
            .map(|h| 0.25 + (-((h as f64 - 13.5).powi(2)) / (2.0 * 2.8f64.powi(2))).exp())
            .collect();
        SynthSpec {
            seed: 0,
            nodes: 200,
            pois: 8,
            start: Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap(),
            hours: 2 * 8760,
            split_hour: 8760 + 4380,
            base_rates: vec![34.0, 22.0, 16.0, 28.0, 11.0, 19.0, 8.0, 24.0],
            daily,
            weekly: vec![0.85, 0.8, 0.85, 0.9, 1.0, 1.35, 1.25],
            seasonal: vec![0.6, 0.65, 0.75, 0.9, 1.0, 1.15, 1.4, 1.45, 1.1, 0.85, 0.7, 0.95],
            holiday_boost: 1.25,
            rain_factor: 0.75,
            open_hours: vec![],
            closed_weekday: vec![],
            sparse_poi: Some(7),
            events: vec![],
            random_events: 12,
            coverage: 0.03,
        }
    }
}

/// Everything [`generate_visits`] produces.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub counts: HourlySeries,
    pub pings: Vec<GeoPing>,
    pub weather: Vec<WeatherRecord>,
    pub holidays: HolidayCalendar,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < self.pois.max(1) {
            return Err(Error::Invalid("synthetic city needs at least as many nodes as POIs".into()));
        }
        if !(0.0..=1.0).contains(&self.coverage) {
            return Err(Error::Invalid("coverage must lie in [0, 1]".into()));
        }
        if self.daily.len() != 24 || self.weekly.len() != 7 || self.seasonal.len() != 12 {
            return Err(Error::Invalid("profiles need 24 daily, 7 weekly and 12 monthly values".into()));
        }
        let rates = self.base_rates.iter().chain(&self.daily).chain(&self.weekly).chain(&self.seasonal);
        if rates.clone().any(|v| !(*v >= 0.0)) || self.events.iter().any(|e| !(e.extra >= 0.0)) {
            return Err(Error::Invalid("rates and multipliers must be nonnegative".into()));
        }
        if !(self.holiday_boost >= 0.0 && self.rain_factor >= 0.0) {
            return Err(Error::Invalid("holiday and rain factors must be nonnegative".into()));
        }
        if self.split_hour == 0 || self.split_hour >= self.hours {
            return Err(Error::Invalid("split hour must fall inside the span".into()));
        }
        if self.events.iter().any(|e| e.poi >= self.pois) || self.sparse_poi.is_some_and(|s| s >= self.pois) {
            return Err(Error::Invalid("event or sparse POI index out of range".into()));
        }
        Ok(())
    }

    pub fn split(&self) -> Timestamp {
        self.start + Duration::hours(self.split_hour as i64)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// Per-POI base rate, opening hours and closed weekday with seed-drawn fill-ins.
    fn poi_schedule(&self) -> Vec<(f64, [u32; 2], Option<u32>)> {
        let mut rng = self.rng(4);
        (0..self.pois)
            .map(|k| {
                let base = self.base_rates.get(k).copied().unwrap_or_else(|| rng.random_range(8.0..35.0));
                let open = self
                    .open_hours
                    .get(k)
                    .copied()
                    .unwrap_or_else(|| [rng.random_range(8..=10), rng.random_range(17..=20)]);
                let closed = match self.closed_weekday.get(k) {
                    Some(c) => *c,
                    None => (k % 3 == 2).then_some(0),
                };
                (base, open, closed)
            })
            .collect()
    }
}

/// Random geometric street graph with a spanning chain, plus POIs near random nodes.
pub fn generate_city(spec: &SynthSpec) -> Result<(StreetGraph, Vec<Poi>)> {
    spec.validate()?;
    let mut rng = spec.rng(1);
    let m_per_deg_lon = METERS_PER_DEG_LAT * CENTER_LAT.to_radians().cos();
    let to_deg = |dx: f64, dy: f64| (CENTER_LAT + dy / METERS_PER_DEG_LAT, CENTER_LON + dx / m_per_deg_lon);
    let nodes: Vec<Node> = (0..spec.nodes)
        .map(|i| {
            let dx = rng.random_range(-SIDE_M / 2.0..SIDE_M / 2.0);
            let dy = rng.random_range(-SIDE_M / 2.0..SIDE_M / 2.0);
            let (lat, lon) = to_deg(dx, dy);
            Node { id: i as u64, lat, lon, poi: None }
        })
        .collect();

    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let dist = |a: &Node, b: &Node| haversine_m(a.lat, a.lon, b.lat, b.lon);
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let d = dist(&nodes[i], &nodes[j]);
            if d < EDGE_RADIUS_M && d > 0.0 {
                edges.push(Edge { u: i as u64, v: j as u64, length_m: d });
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    for i in 1..nodes.len() {
        let (a, b) = (find(&mut parent, i - 1), find(&mut parent, i));
        if a != b {
            edges.push(Edge { u: (i - 1) as u64, v: i as u64, length_m: dist(&nodes[i - 1], &nodes[i]).max(1.0) });
            parent[a] = b;
        }
    }

    let mut anchors: Vec<usize> = (0..nodes.len()).collect();
    for i in 0..spec.pois {
        let j = rng.random_range(i..anchors.len());
        anchors.swap(i, j);
    }
    let pois = (0..spec.pois)
        .map(|k| {
            let a = &nodes[anchors[k]];
            let (dx, dy) = (rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
            Poi { id: k, name: format!("poi_{k}"), lat: a.lat + dy / METERS_PER_DEG_LAT, lon: a.lon + dx / m_per_deg_lon }
        })
        .collect();
    Ok((StreetGraph::new(nodes, edges)?, pois))
}

/// Fixed-date national holidays and school breaks for each covered year.
pub fn synthetic_holidays(first_year: i32, last_year: i32) -> HolidayCalendar {
    let national = [(1, 1), (1, 6), (5, 1), (8, 15), (10, 26), (11, 1), (12, 8), (12, 25), (12, 26)];
    let school = [((2, 10), (2, 16)), ((4, 10), (4, 18)), ((7, 6), (9, 8)), ((10, 27), (11, 2)), ((12, 24), (12, 31)), ((1, 1), (1, 6))];
    let mut entries = Vec::new();
    for y in first_year..=last_year {
        for (m, d) in national {
            entries.push((NaiveDate::from_ymd_opt(y, m, d).unwrap(), HolidayKind::National));
        }
        for ((m0, d0), (m1, d1)) in school {
            let (mut d, end) = (NaiveDate::from_ymd_opt(y, m0, d0).unwrap(), NaiveDate::from_ymd_opt(y, m1, d1).unwrap());
            while d <= end {
                entries.push((d, HolidayKind::School));
                d += Duration::days(1);
            }
        }
    }
    HolidayCalendar::new(&entries, first_year, last_year)
}

fn synthetic_weather(spec: &SynthSpec) -> Vec<WeatherRecord> {
    let mut rng = spec.rng(2);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let (mut temp_noise, mut cloud_latent, mut wind_latent) = (0.0f64, 0.0f64, 0.0f64);
    (0..spec.hours)
        .map(|t| {
            let ts = spec.start + Duration::hours(t as i64);
            let doy = ts.ordinal0() as f64;
            let hour = ts.hour() as f64;
            temp_noise = 0.97 * temp_noise + 0.6 * n01.sample(&mut rng);
            cloud_latent = 0.95 * cloud_latent + 0.3 * n01.sample(&mut rng);
            wind_latent = 0.9 * wind_latent + 0.4 * n01.sample(&mut rng);
            let temp = 9.0 - 11.0 * (2.0 * std::f64::consts::PI * (doy - 20.0) / 365.25).cos()
                + 4.0 * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin()
                + temp_noise;
            let clouds = 100.0 / (1.0 + (-cloud_latent).exp());
            let wind = 8.0 * wind_latent.abs() + 2.0;
            let precip = if clouds > 80.0 && rng.random_bool(0.5) { rng.random_range(0.1..4.0) } else { 0.0 };
            let description = if precip > 0.0 && temp < 1.0 {
                "snow"
            } else if precip > 0.0 {
                "rain"
            } else if temp < 3.0 && clouds > 60.0 && hour < 9.0 {
                "fog"
            } else if clouds > 65.0 {
                "clouds"
            } else {
                "clear"
            };
            let mut numeric = [Some(temp), Some(temp - 0.2 * wind), Some(wind), Some(precip), Some(clouds)];
            // occasional sensor gaps exercise the forward fill
            for v in numeric.iter_mut() {
                if rng.random_bool(0.002) {
                    *v = None;
                }
            }
            WeatherRecord { timestamp: ts, numeric, description: Some(description.to_string()) }
        })
        .collect()
}

fn is_open(ts: &Timestamp, open: [u32; 2], closed: Option<u32>) -> bool {
    let h = ts.hour();
    h >= open[0] && h < open[1] && closed != Some(ts.weekday().num_days_from_monday())
}

/// Hourly intensity of every POI before Poisson sampling (`hours × pois`, row-major).
pub fn intensities(spec: &SynthSpec, weather: &[WeatherRecord], holidays: &HolidayCalendar) -> Result<Vec<f64>> {
    spec.validate()?;
    let schedule = spec.poi_schedule();
    let p = spec.pois;
    let mut lambda = vec![0.0; spec.hours * p];
    for t in 0..spec.hours {
        let ts = spec.start + Duration::hours(t as i64);
        let date = ts.date_naive();
        let holiday = holidays.is_national(date) || holidays.is_school_holiday(date);
        let rain = weather.get(t).and_then(|w| w.numeric[3]).is_some_and(|r| r > 0.0);
        let common = spec.weekly[ts.weekday().num_days_from_monday() as usize]
            * spec.seasonal[ts.month0() as usize]
            * if holiday { spec.holiday_boost } else { 1.0 }
            * if rain { spec.rain_factor } else { 1.0 };
        for (k, (base, open, closed)) in schedule.iter().enumerate() {
            lambda[t * p + k] = if spec.sparse_poi == Some(k) {
                if ts.hour() == 14 { base * common } else { 0.0 }
            } else if is_open(&ts, *open, *closed) {
                base * spec.daily[ts.hour() as usize] * common
            } else {
                0.0
            };
        }
    }
    let mut rng = spec.rng(5);
    let mut events = spec.events.clone();
    let regular: Vec<usize> = (0..p).filter(|&k| spec.sparse_poi != Some(k)).collect();
    for _ in 0..spec.random_events {
        if regular.is_empty() {
            break;
        }
        let poi = regular[rng.random_range(0..regular.len())];
        let day = rng.random_range(0..spec.hours.div_ceil(24));
        let (base, open, _) = schedule[poi];
        events.push(EventSpike {
            poi,
            hour: day * 24 + open[0] as usize + 1,
            duration_hours: rng.random_range(2..6),
            extra: base * rng.random_range(1.0..3.0),
        });
    }
    for e in &events {
        for t in e.hour..(e.hour + e.duration_hours).min(spec.hours) {
            let ts = spec.start + Duration::hours(t as i64);
            let (_, open, closed) = schedule[e.poi];
            if spec.sparse_poi != Some(e.poi) && is_open(&ts, open, closed) {
                lambda[t * p + e.poi] += e.extra;
            }
        }
    }
    Ok(lambda)
}

/// Walks backwards in time from `anchor`, emitting one ping every ten minutes.
#[allow(clippy::too_many_arguments)]
fn walk_pings(
    rng: &mut ChaCha8Rng,
    graph: &StreetGraph,
    neighbors: &[Vec<(usize, f64)>],
    anchor: usize,
    arrival: Timestamp,
    device: &str,
    out: &mut Vec<GeoPing>,
) {
    let minutes = rng.random_range(20..=90);
    let pings = minutes / PING_EVERY_MIN;
    let nodes = graph.nodes();
    let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-8.0..8.0) / METERS_PER_DEG_LAT;
    let (mut at, mut prev) = (anchor, usize::MAX);
    let mut walked = 0.0;
    let mut seg: Option<(usize, usize, f64)> = None;
    for j in 1..=pings {
        let target = (j * PING_EVERY_MIN) as f64 * WALK_M_PER_MIN;
        loop {
            if let Some((u, v, len)) = seg {
                if walked + len >= target {
                    let f = (target - walked) / len;
                    let (a, b) = (&nodes[u], &nodes[v]);
                    let lat = a.lat + f * (b.lat - a.lat) + jitter(rng);
                    let lon = a.lon + f * (b.lon - a.lon) + jitter(rng);
                    out.push(GeoPing {
                        device: device.to_string(),
                        timestamp: arrival - Duration::minutes(j * PING_EVERY_MIN),
                        lat,
                        lon,
                    });
                    break;
                }
                walked += len;
                prev = u;
                at = v;
            }
            let nb = &neighbors[at];
            if nb.is_empty() {
                return;
            }
            let choices: Vec<&(usize, f64)> = nb.iter().filter(|(n, _)| *n != prev).collect();
            let &(next, len) = if choices.is_empty() { &nb[0] } else { choices[rng.random_range(0..choices.len())] };
            seg = Some((at, next, len));
        }
    }
}

/// Visitor counts, pings, weather and holidays for a city from [`generate_city`].
pub fn generate_visits(spec: &SynthSpec, graph: &StreetGraph, pois: &[Poi]) -> Result<SynthData> {
    spec.validate()?;
    if pois.len() != spec.pois {
        return Err(Error::Invalid(format!("{} POIs given, spec has {}", pois.len(), spec.pois)));
    }
    let end = spec.start + Duration::hours(spec.hours as i64 - 1);
    // one year of lookahead so forecasts past the data stay inside the calendar
    let holidays = synthetic_holidays(spec.start.year(), end.year() + 1);
    let weather = synthetic_weather(spec);
    let lambda = intensities(spec, &weather, &holidays)?;

    let columns = (0..spec.pois).map(|k| format!("poi_{k}")).collect();
    let mut counts = HourlySeries::zeros(spec.start, spec.hours, columns);
    let mut rng = spec.rng(3);
    for (c, &l) in counts.values.iter_mut().zip(&lambda) {
        *c = if l > 0.0 { Poisson::new(l).map_err(|e| Error::Invalid(e.to_string()))?.sample(&mut rng) } else { 0.0 };
    }

    let mut pings = Vec::new();
    if spec.coverage > 0.0 && graph.node_count() > 0 {
        let mut rng = spec.rng(6);
        let neighbors = graph.neighbors();
        let anchors: Vec<usize> = pois.iter().map(|p| graph.nearest_index(p.lat, p.lon)).collect();
        let mut device = 0u64;
        for t in 0..spec.hours {
            for k in 0..spec.pois {
                let visitors = counts.get(t, k) as u64;
                for _ in 0..visitors {
                    if !rng.random_bool(spec.coverage) {
                        continue;
                    }
                    let arrival = counts.timestamp(t) + Duration::seconds(rng.random_range(0..3600));
                    walk_pings(&mut rng, graph, &neighbors, anchors[k], arrival, &format!("d{device}"), &mut pings);
                    device += 1;
                }
            }
        }
        pings.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.device.cmp(&b.device)));
    }
    Ok(SynthData { counts, pings, weather, holidays })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec { seed, nodes: 60, pois: 3, hours: 24 * 40, split_hour: 24 * 30, sparse_poi: Some(2), ..Default::default() }
    }

    #[test]
    fn city_is_deterministic() {
        let (g1, p1) = generate_city(&small(7)).unwrap();
        let (g2, p2) = generate_city(&small(7)).unwrap();
        assert_eq!(g1.content_hash(), g2.content_hash());
        assert_eq!(p1, p2);
        let (g3, _) = generate_city(&small(8)).unwrap();
        assert_ne!(g1.content_hash(), g3.content_hash());
    }

    #[test]
    fn two_node_city_is_connected() {
        let spec = SynthSpec { nodes: 2, pois: 1, sparse_poi: None, ..small(1) };
        let (g, _) = generate_city(&spec).unwrap();
        assert_eq!(g.node_count(), 2);
        assert!(g.edge_count() >= 1);
    }

    #[test]
    fn edges_are_short_except_chain_links() {
        let (g, _) = generate_city(&SynthSpec::default()).unwrap();
        for e in g.edges() {
            let (a, b) = (&g.nodes()[g.index(e.u).unwrap()], &g.nodes()[g.index(e.v).unwrap()]);
            let d = haversine_m(a.lat, a.lon, b.lat, b.lon);
            assert!((e.length_m - d.max(1.0)).abs() < 1e-9);
            assert!(d < EDGE_RADIUS_M || e.v == e.u + 1, "{e:?}");
        }
        // every node reachable from node 0
        let nb = g.neighbors();
        let mut seen = vec![false; g.node_count()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if !std::mem::replace(&mut seen[i], true) {
                stack.extend(nb[i].iter().map(|(j, _)| *j));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn constant_intensity_poisson_mean() {
        let spec = SynthSpec {
            nodes: 4,
            pois: 1,
            hours: 10_000,
            split_hour: 5000,
            base_rates: vec![5.0],
            daily: vec![1.0; 24],
            weekly: vec![1.0; 7],
            seasonal: vec![1.0; 12],
            holiday_boost: 1.0,
            rain_factor: 1.0,
            open_hours: vec![[0, 24]],
            closed_weekday: vec![None],
            sparse_poi: None,
            random_events: 0,
            coverage: 0.0,
            ..Default::default()
        };
        let (g, p) = generate_city(&spec).unwrap();
        let d = generate_visits(&spec, &g, &p).unwrap();
        let lambda = intensities(&spec, &d.weather, &d.holidays).unwrap();
        assert!(lambda.iter().all(|&l| l == 5.0));
        let mean = d.counts.values.iter().sum::<f64>() / 10_000.0;
        assert!((4.8..=5.2).contains(&mean), "{mean}");
        assert!(d.pings.is_empty());
    }

    #[test]
    fn closed_hours_and_sparse_poi_are_zero() {
        let spec = SynthSpec { open_hours: vec![[9, 17], [10, 18], [0, 24]], ..small(3) };
        let (g, p) = generate_city(&spec).unwrap();
        let d = generate_visits(&spec, &g, &p).unwrap();
        for t in 0..d.counts.len() {
            let h = d.counts.timestamp(t).hour();
            if !(9..17).contains(&h) {
                assert_eq!(d.counts.get(t, 0), 0.0);
            }
            if h != 14 {
                assert_eq!(d.counts.get(t, 2), 0.0);
            }
        }
        assert!(d.counts.column(2).iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn visits_are_deterministic_and_pings_precede_arrival() {
        let spec = small(11);
        let (g, p) = generate_city(&spec).unwrap();
        let a = generate_visits(&spec, &g, &p).unwrap();
        let b = generate_visits(&spec, &g, &p).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.pings, b.pings);
        assert_eq!(a.weather, b.weather);
        assert!(!a.pings.is_empty());
        assert!(a.counts.values.iter().all(|c| *c >= 0.0 && c.fract() == 0.0));
        let end = spec.start + Duration::hours(spec.hours as i64);
        assert!(a.pings.iter().all(|p| p.timestamp < end));
    }

    #[test]
    fn naive_baseline_has_positive_error() {
        let spec = small(5);
        let (g, p) = generate_city(&spec).unwrap();
        let d = generate_visits(&spec, &g, &p).unwrap();
        let c = &d.counts;
        let diff: f64 = (1..c.len()).map(|t| (c.get(t, 0) - c.get(t - 1, 0)).abs()).sum();
        assert!(diff > 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate_city(&SynthSpec { nodes: 2, pois: 3, ..small(1) }).is_err());
        assert!(generate_city(&SynthSpec { coverage: 1.5, ..small(1) }).is_err());
        assert!(generate_city(&SynthSpec { base_rates: vec![-1.0], ..small(1) }).is_err());
    }
}
