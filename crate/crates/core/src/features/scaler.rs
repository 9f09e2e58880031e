use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column min-max scaler fit on the training span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    /// `rows` is row-major with `width` columns.
    pub fn fit(rows: &[f64], width: usize) -> Result<Self> {
        if width == 0 || rows.is_empty() || rows.len() % width != 0 {
            return Err(Error::Invalid("cannot fit scaler on an empty matrix".into()));
        }
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows.chunks(width) {
            for (c, &v) in row.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// Maps into [0, 1]; constant columns map to 0 and out-of-range values clamp.
    pub fn scale_value(&self, c: usize, v: f64) -> f64 {
        let range = self.max[c] - self.min[c];
        if range > 0.0 {
            ((v - self.min[c]) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn unscale_value(&self, c: usize, v: f64) -> f64 {
        v * (self.max[c] - self.min[c]) + self.min[c]
    }

    pub fn apply(&self, rows: &[f64]) -> Vec<f64> {
        let w = self.width();
        rows.iter().enumerate().map(|(i, &v)| self.scale_value(i % w, v)).collect()
    }

    pub fn invert(&self, rows: &[f64]) -> Vec<f64> {
        let w = self.width();
        rows.iter().enumerate().map(|(i, &v)| self.unscale_value(i % w, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_column() {
        let s = Scaler::fit(&[2.0, 4.0, 6.0], 1).unwrap();
        assert_eq!(s.apply(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let s = Scaler::fit(&[3.0, 3.0], 1).unwrap();
        assert_eq!(s.apply(&[3.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn out_of_range_clamps() {
        let s = Scaler::fit(&[2.0, 6.0], 1).unwrap();
        assert_eq!(s.apply(&[8.0, -1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn empty_is_error() {
        assert!(Scaler::fit(&[], 3).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_on_nonconstant_columns(
            rows in prop::collection::vec(prop::array::uniform3(-1e3f64..1e3), 2..40)
        ) {
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let s = Scaler::fit(&flat, 3).unwrap();
            let back = s.invert(&s.apply(&flat));
            for (i, (a, b)) in flat.iter().zip(&back).enumerate() {
                let c = i % 3;
                if s.max[c] > s.min[c] {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs().max(s.max[c].abs())));
                }
            }
        }
    }
}
