//! Exogenous hourly features and the windowed supervised dataset.

mod calendar;
mod dataset;
mod scaler;
mod weather;

pub use calendar::{CalendarEncoder, HolidayCalendar, HolidayKind, CALENDAR_COLUMNS};
pub use dataset::{
    build_dataset, DatasetOptions, DatasetScalers, InputSet, SequenceDataset, Split, Window,
    WindowView,
};
pub use scaler::Scaler;
pub use weather::{
    encode_weather, read_weather, weather_matrix, write_weather, WeatherRecord, WeatherVocab,
    WEATHER_NUMERIC_COLUMNS,
};

use crate::error::{Error, Result};
use crate::series::{HourlySeries, Timestamp};

/// T×F exogenous feature matrix on an hourly grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub series: HourlySeries,
}

impl FeatureFrame {
    pub fn width(&self) -> usize {
        self.series.width()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn columns(&self) -> &[String] {
        &self.series.columns
    }

    /// Calendar block followed by the optional weather block.
    pub fn build(
        start: Timestamp,
        hours: usize,
        calendar: &CalendarEncoder,
        weather: Option<(&[WeatherRecord], &WeatherVocab)>,
    ) -> Result<Self> {
        let mut columns: Vec<String> = CALENDAR_COLUMNS.iter().map(|s| s.to_string()).collect();
        let weather_rows = match weather {
            Some((records, vocab)) => {
                columns.extend(WEATHER_NUMERIC_COLUMNS.iter().map(|s| s.to_string()));
                columns.extend(vocab.words().iter().map(|w| format!("weather_{w}")));
                Some(weather_matrix(records, vocab, start, hours))
            }
            None => None,
        };
        let mut series = HourlySeries::zeros(start, hours, columns);
        for t in 0..hours {
            let ts = series.timestamp(t);
            let mut row = calendar.encode(&ts)?.to_vec();
            if let Some(w) = &weather_rows {
                row.extend_from_slice(&w[t]);
            }
            if row.len() != series.width() {
                return Err(Error::Shape("feature row width".into()));
            }
            series.row_mut(t).copy_from_slice(&row);
        }
        Ok(FeatureFrame { series })
    }
}
