use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Mae,
    Huber,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Mse, LossKind::Mae, LossKind::Huber];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Mae => "mae",
            LossKind::Huber => "huber",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mse" => Ok(LossKind::Mse),
            "mae" => Ok(LossKind::Mae),
            "huber" => Ok(LossKind::Huber),
            other => Err(Error::Invalid(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub kind: LossKind,
    pub huber_delta: f64,
}

impl From<LossKind> for Loss {
    fn from(kind: LossKind) -> Self {
        Loss { kind, huber_delta: 1.0 }
    }
}

impl Loss {
    pub fn new(kind: LossKind) -> Self {
        kind.into()
    }

    /// Per-cell loss and its derivative with respect to the prediction.
    pub fn pointwise(&self, pred: f64, target: f64) -> (f64, f64) {
        let r = pred - target;
        match self.kind {
            LossKind::Mse => (r * r, 2.0 * r),
            // subgradient 0 at r = 0
            LossKind::Mae => (r.abs(), if r > 0.0 { 1.0 } else if r < 0.0 { -1.0 } else { 0.0 }),
            LossKind::Huber => {
                let d = self.huber_delta;
                if r.abs() <= d {
                    (0.5 * r * r, r)
                } else {
                    (d * (r.abs() - 0.5 * d), d * r.signum())
                }
            }
        }
    }

    /// Mean loss over all cells and the gradient with respect to `pred`.
    pub fn evaluate(&self, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        if pred.len() != target.len() {
            return Err(Error::Shape(format!("pred {} vs target {}", pred.len(), target.len())));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::Invalid("huber delta must be positive".into()));
        }
        if pred.is_empty() {
            return Ok((0.0, vec![]));
        }
        let n = pred.len() as f64;
        let mut total = 0.0;
        let grad = pred
            .iter()
            .zip(target)
            .map(|(&p, &t)| {
                let (l, g) = self.pointwise(p, t);
                total += l;
                g / n
            })
            .collect();
        Ok((total / n, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_give_zero() {
        for k in LossKind::ALL {
            let (l, g) = Loss::new(k).evaluate(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
            assert_eq!(l, 0.0);
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn hand_values() {
        let eval = |k| Loss::new(k).evaluate(&[3.0], &[1.0]).unwrap().0;
        assert_eq!(eval(LossKind::Mse), 4.0);
        assert_eq!(eval(LossKind::Mae), 2.0);
        assert_eq!(eval(LossKind::Huber), 1.5);
    }

    #[test]
    fn huber_matches_piecewise_definition() {
        let h = Loss::new(LossKind::Huber);
        let mse = Loss::new(LossKind::Mse);
        let mae = Loss::new(LossKind::Mae);
        for k in -400..=400 {
            let r = k as f64 * 0.01;
            let (l, g) = h.pointwise(r, 0.0);
            if r.abs() <= 1.0 {
                assert!((l - mse.pointwise(r, 0.0).0 / 2.0).abs() < 1e-15);
                assert!((g - r).abs() < 1e-15);
            } else {
                // linear branch: slope of mae, offset so the branches meet at |r| = 1
                assert!((l - (mae.pointwise(r, 0.0).0 - 0.5)).abs() < 1e-15);
                assert_eq!(g, mae.pointwise(r, 0.0).1);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        assert!(Loss::new(LossKind::Mse).evaluate(&[1.0], &[]).is_err());
    }

    #[test]
    fn nonnegative_and_zero_only_at_equality() {
        for k in LossKind::ALL {
            let l = Loss::new(k);
            for &(p, t) in &[(0.5, 0.2), (-3.0, 4.0), (1e-9, 0.0)] {
                let v = l.pointwise(p, t).0;
                assert!(v > 0.0);
            }
        }
    }
}
