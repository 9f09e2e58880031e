use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FeatureFrame, Scaler};
use crate::error::{Error, Result};
use crate::models::StepSource;
use crate::series::{HourlySeries, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Which columns feed a non-graph model's input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputSet {
    /// POI counts only.
    Visitors,
    /// POI counts and exogenous features.
    Features,
    /// POI counts, exogenous features and per-node geolocation counts.
    Geo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub seq_len: usize,
    pub inputs: InputSet,
    pub normalize_visitors: bool,
    /// Graph layout: per-node observations are attached alongside the inputs.
    pub graph: bool,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions { seq_len: 30, inputs: InputSet::Features, normalize_visitors: true, graph: false }
    }
}

/// Scalers fit on the training split and shared by both splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScalers {
    /// `None` when visitor counts are left unnormalized.
    pub counts: Option<Scaler>,
    pub features: Scaler,
    pub pings: Option<Scaler>,
}

impl DatasetScalers {
    /// Converts model-space POI predictions back to counts, clamped at zero.
    pub fn to_counts(&self, pred: &[f64]) -> Vec<f64> {
        match &self.counts {
            Some(s) => pred.iter().enumerate().map(|(c, &v)| s.unscale_value(c, v).max(0.0)).collect(),
            None => pred.iter().map(|v| v.max(0.0)).collect(),
        }
    }

    pub fn scale_counts(&self, counts: &[f64]) -> Vec<f64> {
        match &self.counts {
            Some(s) => counts.iter().enumerate().map(|(c, &v)| s.scale_value(c, v)).collect(),
            None => counts.to_vec(),
        }
    }
}

/// One length-`seq_len` training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Hour index of the first input step on the full series grid.
    pub offset: usize,
    /// `seq_len × input_width`.
    pub inputs: Vec<f64>,
    /// `seq_len × output_width`, model space; step t holds hour `offset + t + 1`.
    pub targets: Vec<f64>,
    /// Same cells as `targets`, in counts.
    pub raw_targets: Vec<f64>,
    /// `(seq_len + 1) × node_width` node observations for graph models.
    pub observations: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SequenceDataset {
    pub split: Split,
    pub seq_len: usize,
    /// Timestamp of hour index 0.
    pub origin: Timestamp,
    pub input_width: usize,
    pub output_width: usize,
    pub node_width: usize,
    pub poi_nodes: Vec<usize>,
    pub options: DatasetOptions,
    pub scalers: Arc<DatasetScalers>,
    pub windows: Vec<Window>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn view(&self, w: usize) -> WindowView<'_> {
        WindowView { ds: self, window: &self.windows[w] }
    }

    pub fn target_timestamp(&self, w: usize, t: usize) -> Timestamp {
        self.origin + chrono::Duration::hours((self.windows[w].offset + t + 1) as i64)
    }

    /// Copy holding only the given windows (in order).
    pub fn subset(&self, idx: &[usize]) -> SequenceDataset {
        SequenceDataset { windows: idx.iter().map(|&i| self.windows[i].clone()).collect(), ..self.clone() }
    }
}

/// Borrowed view of one window as a step source.
#[derive(Debug, Clone, Copy)]
pub struct WindowView<'a> {
    ds: &'a SequenceDataset,
    window: &'a Window,
}

impl<'a> WindowView<'a> {
    pub fn window(&self) -> &'a Window {
        self.window
    }

    pub fn target(&self, t: usize) -> &'a [f64] {
        let p = self.ds.output_width;
        &self.window.targets[t * p..(t + 1) * p]
    }

    pub fn raw_target(&self, t: usize) -> &'a [f64] {
        let p = self.ds.output_width;
        &self.window.raw_targets[t * p..(t + 1) * p]
    }
}

impl StepSource for WindowView<'_> {
    fn steps(&self) -> usize {
        self.ds.seq_len
    }

    fn input(&self, t: usize) -> &[f64] {
        let i = self.ds.input_width;
        &self.window.inputs[t * i..(t + 1) * i]
    }

    fn observation(&self, t: usize) -> &[f64] {
        let n = self.ds.node_width;
        match &self.window.observations {
            Some(o) => &o[t * n..(t + 1) * n],
            None => &[],
        }
    }
}

fn split_index(counts: &HourlySeries, split: &Timestamp) -> Result<usize> {
    if *split <= counts.start || *split >= counts.end() {
        return Err(Error::Invalid("split boundary outside data".into()));
    }
    let secs = split.signed_duration_since(counts.start).num_seconds();
    Ok(((secs + 3599) / 3600) as usize)
}

fn fit_columns(series: &HourlySeries, rows: std::ops::Range<usize>) -> Result<Scaler> {
    let w = series.width();
    if w == 0 {
        return Ok(Scaler { min: vec![], max: vec![] });
    }
    Scaler::fit(&series.values[rows.start * w..rows.end * w], w)
}

/// Partitions both splits into non-overlapping windows of `seq_len + 1` hours.
///
/// `pings` holds per-node geolocation counts on the same grid; `poi_nodes` maps poi id to
/// node index and is required for graph datasets.
pub fn build_dataset(
    counts: &HourlySeries,
    features: &FeatureFrame,
    pings: Option<&HourlySeries>,
    poi_nodes: Option<&[usize]>,
    split: Timestamp,
    options: DatasetOptions,
) -> Result<(SequenceDataset, SequenceDataset)> {
    let grid_ok = |s: &HourlySeries| s.start == counts.start && s.len() == counts.len();
    if !grid_ok(&features.series) {
        return Err(Error::Shape("counts and features are on different grids".into()));
    }
    if let Some(p) = pings {
        if !grid_ok(p) {
            return Err(Error::Shape("counts and pings are on different grids".into()));
        }
    }
    let needs_pings = options.graph || options.inputs == InputSet::Geo;
    if needs_pings && pings.is_none() {
        return Err(Error::Invalid("geolocation counts required for this dataset".into()));
    }
    if options.graph && poi_nodes.map_or(true, |p| p.len() != counts.width()) {
        return Err(Error::Invalid("graph datasets need one POI node per count column".into()));
    }
    if options.seq_len == 0 {
        return Err(Error::Invalid("sequence length must be positive".into()));
    }
    let cut = split_index(counts, &split)?;
    let count_scaler = if options.normalize_visitors { Some(fit_columns(counts, 0..cut)?) } else { None };
    let feature_scaler = fit_columns(&features.series, 0..cut)?;
    let ping_scaler = match pings {
        Some(p) if needs_pings => Some(fit_columns(p, 0..cut)?),
        _ => None,
    };
    let scalers = Arc::new(DatasetScalers { counts: count_scaler, features: feature_scaler, pings: ping_scaler });

    let p = counts.width();
    let use_features = options.inputs != InputSet::Visitors;
    let f = if use_features { features.width() } else { 0 };
    let n_nodes = if options.graph { pings.unwrap().width() } else { 0 };
    let g = if !options.graph && options.inputs == InputSet::Geo { pings.unwrap().width() } else { 0 };
    let input_width = p + f + g;

    let scaled_counts = |t: usize| scalers.scale_counts(counts.row(t));
    let scaled_features = |t: usize| -> Vec<f64> {
        features.series.row(t).iter().enumerate().map(|(c, &v)| scalers.features.scale_value(c, v)).collect()
    };
    let scaled_pings = |t: usize| -> Vec<f64> {
        let s = scalers.pings.as_ref().unwrap();
        pings.unwrap().row(t).iter().enumerate().map(|(c, &v)| s.scale_value(c, v)).collect()
    };

    let make = |range: std::ops::Range<usize>, which: Split| -> SequenceDataset {
        let len = options.seq_len;
        let mut windows = Vec::new();
        let mut offset = range.start;
        while offset + len < range.end {
            let mut w = Window {
                offset,
                inputs: Vec::with_capacity(len * input_width),
                targets: Vec::with_capacity(len * p),
                raw_targets: Vec::with_capacity(len * p),
                observations: options.graph.then(|| Vec::with_capacity((len + 1) * n_nodes)),
            };
            for t in 0..len {
                let h = offset + t;
                w.inputs.extend(scaled_counts(h));
                if use_features {
                    w.inputs.extend(scaled_features(h));
                }
                if g > 0 {
                    w.inputs.extend(scaled_pings(h));
                }
                w.targets.extend(scaled_counts(h + 1));
                w.raw_targets.extend_from_slice(counts.row(h + 1));
            }
            if let Some(obs) = w.observations.as_mut() {
                let pois = poi_nodes.unwrap();
                for t in 0..=len {
                    let mut row = scaled_pings(offset + t);
                    let c = scaled_counts(offset + t);
                    for (k, &node) in pois.iter().enumerate() {
                        row[node] = c[k];
                    }
                    obs.extend(row);
                }
            }
            windows.push(w);
            offset += len + 1;
        }
        SequenceDataset {
            split: which,
            seq_len: len,
            origin: counts.start,
            input_width,
            output_width: p,
            node_width: n_nodes,
            poi_nodes: poi_nodes.map(<[usize]>::to_vec).unwrap_or_default(),
            options,
            scalers: scalers.clone(),
            windows,
        }
    };
    Ok((make(0..cut, Split::Train), make(cut..counts.len(), Split::Test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn series(hours: usize) -> (HourlySeries, FeatureFrame) {
        let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let mut c = HourlySeries::zeros(start, hours, vec!["poi_0".into()]);
        for t in 0..hours {
            c.values[t] = t as f64;
        }
        let f = FeatureFrame { series: HourlySeries::zeros(start, hours, vec!["f".into()]) };
        (c, f)
    }

    #[test]
    fn windowing_counts() {
        let opts = DatasetOptions::default();
        // hours 0..=61 (62 points) hold two windows; a trailing partial window is dropped
        let (c, f) = series(62 + 10);
        let split = c.timestamp(62);
        let (train, test) = build_dataset(&c, &f, None, None, split, opts).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 0);
        let (c, f) = series(61 + 10);
        let (train, _) = build_dataset(&c, &f, None, None, c.timestamp(61), opts).unwrap();
        assert_eq!(train.len(), 1);
        let (c, f) = series(40);
        let (train, _) = build_dataset(&c, &f, None, None, c.timestamp(30), opts).unwrap();
        assert_eq!(train.len(), 0);
    }

    #[test]
    fn split_outside_data_is_error() {
        let (c, f) = series(40);
        let r = build_dataset(&c, &f, None, None, c.timestamp(40), DatasetOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn misaligned_grids_error() {
        let (c, _) = series(40);
        let (_, f) = series(39);
        assert!(matches!(
            build_dataset(&c, &f, None, None, c.timestamp(20), DatasetOptions::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn raw_targets_are_next_hour() {
        let (c, f) = series(100);
        let (train, _) = build_dataset(&c, &f, None, None, c.timestamp(70), DatasetOptions::default()).unwrap();
        let v = train.view(1);
        assert_eq!(v.raw_target(0), &[32.0]);
        assert_eq!(v.raw_target(29), &[61.0]);
    }
}
