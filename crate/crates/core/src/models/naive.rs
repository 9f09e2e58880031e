use crate::error::{Error, Result};
use crate::series::HourlySeries;

/// Last-value forecast `ŷ_t = y_{t−1}`; the returned series starts one hour later since
/// the first hour has no prediction.
pub fn naive_forecast(series: &HourlySeries) -> Result<HourlySeries> {
    if series.len() < 2 {
        return Err(Error::TooShort { need: 1, got: series.len() });
    }
    let w = series.width();
    Ok(HourlySeries {
        start: series.timestamp(1),
        columns: series.columns.clone(),
        values: series.values[..(series.len() - 1) * w].to_vec(),
    })
}
