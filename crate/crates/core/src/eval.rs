//! Error metrics, one-step-ahead evaluation and report files.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SequenceDataset;
use crate::models::{PredictionSink, RecurrentModel, StepSource};
use crate::series::{csv_err, csv_io, format_timestamp, parse_timestamp, HourlySeries, Timestamp};

/// Steps used for the latency measurement.
pub const LATENCY_STEPS: usize = 1000;

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(Error::Invalid("metric of empty input".into()));
    }
    Ok(())
}

pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    Ok((pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn of(pred: &[f64], target: &[f64]) -> Result<Self> {
        Ok(Metrics { mae: mae(pred, target)?, rmse: rmse(pred, target)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoiMetrics {
    pub poi_id: usize,
    pub mae: f64,
    pub rmse: f64,
}

/// Scored cells in count space, row-major by target hour.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traces {
    pub width: usize,
    pub timestamps: Vec<Timestamp>,
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

impl Traces {
    pub fn new(width: usize) -> Self {
        Traces { width, ..Default::default() }
    }

    pub fn push(&mut self, ts: Timestamp, truth: &[f64], pred: &[f64]) {
        debug_assert!(truth.len() == self.width && pred.len() == self.width);
        self.timestamps.push(ts);
        self.truth.extend_from_slice(truth);
        self.pred.extend_from_slice(pred);
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        let pick = |v: &[f64]| v.iter().skip(k).step_by(self.width).copied().collect();
        (pick(&self.truth), pick(&self.pred))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub model: String,
    pub config: serde_json::Value,
    pub pooled: Metrics,
    pub per_poi: Vec<PoiMetrics>,
    pub train_minutes: f64,
    pub pred_ms: f64,
    #[serde(skip)]
    pub traces: Traces,
}

impl ForecastReport {
    pub fn from_traces(model: &str, config: serde_json::Value, traces: Traces) -> Result<Self> {
        let pooled = Metrics::of(&traces.pred, &traces.truth)?;
        let per_poi = (0..traces.width)
            .map(|k| {
                let (t, p) = traces.column(k);
                Ok(PoiMetrics { poi_id: k, mae: mae(&p, &t)?, rmse: rmse(&p, &t)? })
            })
            .collect::<Result<_>>()?;
        Ok(ForecastReport { model: model.into(), config, pooled, per_poi, train_minutes: 0.0, pred_ms: 0.0, traces })
    }

    /// `metrics.json` content without the wall-clock fields, for reproducibility checks.
    pub fn timing_free_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("train_minutes");
            o.remove("pred_ms");
        }
        v
    }
}

/// Runs one window, handing each model-space prediction to `sink` as it is produced.
pub fn predict_window<S: StepSource + ?Sized>(
    model: &RecurrentModel,
    src: &S,
    sink: Option<PredictionSink<'_>>,
) -> Result<Vec<f64>> {
    Ok(model.forward(src, sink)?.preds)
}

fn check_compatible(model: &RecurrentModel, ds: &SequenceDataset) -> Result<()> {
    if model.input_size != ds.input_width || model.output_size != ds.output_width {
        return Err(Error::Shape(format!(
            "model maps {}→{}, dataset provides {}→{}",
            model.input_size, model.output_size, ds.input_width, ds.output_width
        )));
    }
    if let Some(g) = &model.graph {
        if ds.node_width != model.hidden_size || g.poi_nodes != ds.poi_nodes {
            return Err(Error::Shape("model graph does not match the dataset graph".into()));
        }
    } else if ds.options.graph {
        return Err(Error::Shape("graph dataset given to a non-graph model".into()));
    }
    Ok(())
}

/// One-step-ahead predictions for every window, inverse-scaled and clamped at zero.
pub fn predict_dataset(model: &RecurrentModel, ds: &SequenceDataset) -> Result<Traces> {
    check_compatible(model, ds)?;
    let per_window: Vec<Vec<f64>> =
        (0..ds.len()).into_par_iter().map(|w| predict_window(model, &ds.view(w), None)).collect::<Result<_>>()?;
    let p = ds.output_width;
    let mut traces = Traces::new(p);
    for (w, preds) in per_window.iter().enumerate() {
        let view = ds.view(w);
        for t in 0..ds.seq_len {
            let counts = ds.scalers.to_counts(&preds[t * p..(t + 1) * p]);
            traces.push(ds.target_timestamp(w, t), view.raw_target(t), &counts);
        }
    }
    Ok(traces)
}

/// Mean wall-clock milliseconds per forward step, over at least `min_steps` steps.
pub fn measure_latency(model: &RecurrentModel, ds: &SequenceDataset, min_steps: usize) -> Result<f64> {
    check_compatible(model, ds)?;
    if ds.is_empty() {
        return Err(Error::Invalid("latency needs at least one window".into()));
    }
    let mut steps = 0;
    let start = Instant::now();
    let mut w = 0;
    while steps < min_steps {
        let preds = predict_window(model, &ds.view(w), None)?;
        std::hint::black_box(preds);
        steps += ds.seq_len;
        w = (w + 1) % ds.len();
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / steps as f64)
}

pub fn evaluate_model(
    model: &RecurrentModel,
    ds: &SequenceDataset,
    name: &str,
    config: serde_json::Value,
) -> Result<ForecastReport> {
    let traces = predict_dataset(model, ds)?;
    let mut report = ForecastReport::from_traces(name, config, traces)?;
    report.pred_ms = measure_latency(model, ds, LATENCY_STEPS)?;
    Ok(report)
}

/// Scores an hourly forecast matrix (one row per hour on the count grid) on exactly the
/// cells the dataset's windows target.
pub fn evaluate_hourly(
    name: &str,
    config: serde_json::Value,
    forecasts: &HourlySeries,
    ds: &SequenceDataset,
) -> Result<ForecastReport> {
    if forecasts.width() != ds.output_width {
        return Err(Error::Shape(format!("{} forecast columns for {} POIs", forecasts.width(), ds.output_width)));
    }
    let mut traces = Traces::new(ds.output_width);
    for w in 0..ds.len() {
        let view = ds.view(w);
        for t in 0..ds.seq_len {
            let ts = ds.target_timestamp(w, t);
            let row = forecasts
                .index_of(&ts)
                .ok_or_else(|| Error::Shape(format!("no forecast for {}", format_timestamp(&ts))))?;
            traces.push(ts, view.raw_target(t), forecasts.row(row));
        }
    }
    ForecastReport::from_traces(name, config, traces)
}

/// Writes `metrics.json`, `metrics.csv` and `traces/poi_<k>.csv`.
pub fn emit_report(report: &ForecastReport, dir: &Path) -> Result<()> {
    let traces_dir = dir.join("traces");
    std::fs::create_dir_all(&traces_dir).map_err(|e| Error::io(&traces_dir, e))?;
    let json_path = dir.join("metrics.json");
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;

    let csv_path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_io(&csv_path, e))?;
    w.write_record(["scope", "poi_id", "mae", "rmse"]).map_err(|e| csv_io(&csv_path, e))?;
    let pooled = report.pooled;
    w.write_record(["pooled", "", &pooled.mae.to_string(), &pooled.rmse.to_string()])
        .map_err(|e| csv_io(&csv_path, e))?;
    for m in &report.per_poi {
        w.write_record(["poi", &m.poi_id.to_string(), &m.mae.to_string(), &m.rmse.to_string()])
            .map_err(|e| csv_io(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let tr = &report.traces;
    for k in 0..tr.width.max(report.per_poi.len()) {
        let path = traces_dir.join(format!("poi_{k}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
        w.write_record(["timestamp", "true", "pred"]).map_err(|e| csv_io(&path, e))?;
        if k < tr.width {
            let (truth, pred) = tr.column(k);
            for ((ts, t), p) in tr.timestamps.iter().zip(truth).zip(pred) {
                w.write_record([format_timestamp(ts), t.to_string(), p.to_string()])
                    .map_err(|e| csv_io(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Reads one `traces/poi_<k>.csv` back as `(timestamp, true, pred)` rows.
pub fn read_trace(path: &Path) -> Result<Vec<(Timestamp, f64, f64)>> {
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&name, e))?;
        let line = i + 2;
        let ts = rec
            .get(0)
            .and_then(parse_timestamp)
            .ok_or_else(|| Error::parse(&name, line, "bad timestamp"))?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c).and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(&name, line, "bad number"))
        };
        out.push((ts, num(1)?, num(2)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[3.0, -4.0], &[0.0, 0.0]).unwrap(), 3.5);
        assert!((rmse(&[3.0, -4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn mae_never_exceeds_rmse(e in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let z = vec![0.0; e.len()];
            prop_assert!(mae(&e, &z).unwrap() <= rmse(&e, &z).unwrap() * (1.0 + 1e-12));
        }
    }

    fn sample_traces() -> Traces {
        let t0 = Utc.with_ymd_and_hms(2020, 5, 1, 0, 0, 0).unwrap();
        let mut t = Traces::new(2);
        t.push(t0, &[1.0, 5.0], &[2.0, 5.0]);
        t.push(t0 + chrono::Duration::hours(1), &[0.0, 3.0], &[0.125, 1.0 / 3.0]);
        t
    }

    #[test]
    fn per_poi_and_pooled() {
        let r = ForecastReport::from_traces("x", serde_json::Value::Null, sample_traces()).unwrap();
        assert_eq!(r.per_poi[1].mae, (0.0 + (3.0 - 1.0 / 3.0)) / 2.0);
        assert_eq!(r.pooled.mae, (1.0 + 0.0 + 0.125 + (3.0 - 1.0 / 3.0)) / 4.0);
    }

    #[test]
    fn permuting_pois_permutes_metrics() {
        let t = sample_traces();
        let mut s = Traces::new(2);
        for i in 0..t.len() {
            let swap = |v: &[f64]| [v[2 * i + 1], v[2 * i]];
            s.push(t.timestamps[i], &swap(&t.truth), &swap(&t.pred));
        }
        let a = ForecastReport::from_traces("x", serde_json::Value::Null, t).unwrap();
        let b = ForecastReport::from_traces("x", serde_json::Value::Null, s).unwrap();
        assert!((a.pooled.mae - b.pooled.mae).abs() < 1e-15);
        assert!((a.pooled.rmse - b.pooled.rmse).abs() < 1e-15);
        assert_eq!(a.per_poi[0].mae, b.per_poi[1].mae);
        assert_eq!(a.per_poi[1].rmse, b.per_poi[0].rmse);
    }

    #[test]
    fn emitted_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = ForecastReport::from_traces("naive", serde_json::json!({"k": 1}), sample_traces()).unwrap();
        emit_report(&r, dir.path()).unwrap();
        let back = read_trace(&dir.path().join("traces/poi_1.csv")).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].2, 1.0 / 3.0);
        assert_eq!(back[0].0, r.traces.timestamps[0]);
        let json: ForecastReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let pooled: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(pooled[2].parse::<f64>().unwrap(), json.pooled.mae);
        assert_eq!(pooled[3].parse::<f64>().unwrap(), json.pooled.rmse);
    }

    #[test]
    fn empty_traces_write_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let r = ForecastReport {
            model: "none".into(),
            config: serde_json::Value::Null,
            pooled: Metrics { mae: 0.0, rmse: 0.0 },
            per_poi: vec![PoiMetrics { poi_id: 0, mae: 0.0, rmse: 0.0 }],
            train_minutes: 0.0,
            pred_ms: 0.0,
            traces: Traces::new(1),
        };
        emit_report(&r, dir.path()).unwrap();
        let t = std::fs::read_to_string(dir.path().join("traces/poi_0.csv")).unwrap();
        assert_eq!(t, "timestamp,true,pred\n");
    }
}
