//! Non-seasonal ARIMA(p, d, q) baseline fitted by conditional sum of squares.
//!
//! The differenced series `w` follows
//! `w_t = c + Σ φ_i w_{t−i} + Σ θ_j e_{t−j} + e_t`, with residuals before the first
//! conditioned observation taken as zero. Fitting standardizes `w`, starts from a
//! Hannan–Rissanen regression and refines with Adam, rejecting any step that raises the
//! objective. AR roots are not constrained.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::csv_io;
use crate::training::{Adam, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q }
    }

    /// Every order with `p ≤ max_p`, `d ≤ max_d`, `q ≤ max_q`.
    pub fn grid(max_p: usize, max_d: usize, max_q: usize) -> Vec<ArimaOrder> {
        let mut out = Vec::new();
        for p in 0..=max_p {
            for d in 0..=max_d {
                for q in 0..=max_q {
                    out.push(ArimaOrder { p, d, q });
                }
            }
        }
        out
    }

    fn min_len(&self) -> usize {
        self.d + self.p.max(self.q) + 10
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub lr: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iters: 500, tol: 1e-10, lr: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub intercept: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    /// CSS / number of residuals in the objective.
    pub sigma2: f64,
    pub css: f64,
    /// Number of residuals in the objective.
    pub n_eff: usize,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial point.
    pub objective_trace: Vec<f64>,
    history: Vec<f64>,
    diffs: Vec<f64>,
    residuals: Vec<f64>,
}

/// d-fold first differences.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::TooShort { need: d, got: series.len() });
    }
    let mut s = series.to_vec();
    for _ in 0..d {
        s = s.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(s)
}

/// Inverts [`difference`] given the first `d` values of the original series.
pub fn integrate(diffs: &[f64], anchors: &[f64], d: usize) -> Result<Vec<f64>> {
    if anchors.len() != d {
        return Err(Error::Invalid(format!("integrate needs {d} anchors, got {}", anchors.len())));
    }
    let mut s = diffs.to_vec();
    for level in (0..d).rev() {
        // first value of the `level`-th difference of the original series
        let first = difference(anchors, level).map(|v| v[0]).unwrap_or(anchors[0]);
        let mut out = Vec::with_capacity(s.len() + 1);
        out.push(first);
        for v in &s {
            let last = *out.last().unwrap();
            out.push(last + v);
        }
        s = out;
    }
    Ok(s)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Conditional residuals and, optionally, the gradient of the mean squared residual with
/// respect to `[c, φ…, θ…]`.
fn css(w: &[f64], p: usize, q: usize, params: &[f64], from: usize, want_grad: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let k = 1 + p + q;
    let (c, phi, theta) = (params[0], &params[1..1 + p], &params[1 + p..]);
    let n = w.len();
    let mut e = vec![0.0; n];
    let mut de = if want_grad { vec![0.0; n * k] } else { vec![] };
    let mut total = 0.0;
    let mut grad = vec![0.0; if want_grad { k } else { 0 }];
    for t in p..n {
        let mut pred = c;
        for i in 0..p {
            pred += phi[i] * w[t - 1 - i];
        }
        for j in 0..q {
            if t >= p + 1 + j {
                pred += theta[j] * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
        let counted = t >= from;
        if counted {
            total += e[t] * e[t];
        }
        if want_grad {
            // de_t = −∂pred/∂param − Σ θ_j de_{t−1−j}
            let mut row = vec![0.0; k];
            row[0] = -1.0;
            for i in 0..p {
                row[1 + i] = -w[t - 1 - i];
            }
            for j in 0..q {
                if t >= p + 1 + j {
                    row[1 + p + j] -= e[t - 1 - j];
                    let prev = &de[(t - 1 - j) * k..(t - j) * k];
                    for (r, pv) in row.iter_mut().zip(prev) {
                        *r -= theta[j] * pv;
                    }
                }
            }
            if counted {
                for (g, r) in grad.iter_mut().zip(&row) {
                    *g += 2.0 * e[t] * r;
                }
            }
            de[t * k..(t + 1) * k].copy_from_slice(&row);
        }
    }
    let m = (n - from) as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    (total / m, grad, e)
}

/// Ordinary least squares via normal equations with a tiny ridge.
fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = x.first()?.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &yv) in x.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * yv;
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += 1e-9;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let sol: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Regression of w_t on [1, w lags, residual lags] using long-AR residual estimates.
fn hannan_rissanen(w: &[f64], p: usize, q: usize) -> Vec<f64> {
    let mut start = vec![0.0; 1 + p + q];
    let resid: Vec<f64> = if q > 0 {
        let m = (p.max(q) + 5).min(w.len() / 4).max(1);
        let x: Vec<Vec<f64>> = (m..w.len()).map(|t| {
            let mut r = vec![1.0];
            r.extend((1..=m).map(|i| w[t - i]));
            r
        }).collect();
        match least_squares(&x, &w[m..]) {
            Some(b) => (0..w.len())
                .map(|t| {
                    if t < m {
                        0.0
                    } else {
                        w[t] - b[0] - (1..=m).map(|i| b[i] * w[t - i]).sum::<f64>()
                    }
                })
                .collect(),
            None => vec![0.0; w.len()],
        }
    } else {
        vec![]
    };
    let lag0 = p.max(if q > 0 { q + (p.max(q) + 5).min(w.len() / 4).max(1) } else { 0 });
    if lag0 >= w.len() {
        return start;
    }
    let x: Vec<Vec<f64>> = (lag0..w.len()).map(|t| {
        let mut r = vec![1.0];
        r.extend((1..=p).map(|i| w[t - i]));
        r.extend((1..=q).map(|j| resid[t - j]));
        r
    }).collect();
    if let Some(b) = least_squares(&x, &w[lag0..]) {
        start = b;
    }
    start
}

/// Fits ARIMA(p, d, q) to `series` by CSS.
pub fn fit_css(series: &[f64], order: ArimaOrder, opts: FitOptions) -> Result<ArimaModel> {
    fit_from(series, order, opts, None, order.p + order.d)
}

/// `first_level` is the first index of the level series whose residual enters the
/// objective; it must be at least `p + d`.
fn fit_from(
    series: &[f64],
    order: ArimaOrder,
    opts: FitOptions,
    warm: Option<Vec<f64>>,
    first_level: usize,
) -> Result<ArimaModel> {
    let ArimaOrder { p, d, q } = order;
    if series.len() <= order.min_len().max(first_level + 10) {
        return Err(Error::TooShort { need: order.min_len().max(first_level + 10), got: series.len() });
    }
    let from = first_level.max(p + d) - d;
    let w = difference(series, d)?;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let z: Vec<f64> = w.iter().map(|v| (v - mean) / sd).collect();
    let to_std = |params: &[f64]| -> Vec<f64> {
        // c = c'·sd + mean·(1 − Σφ)
        let mut s = params.to_vec();
        let phi_sum: f64 = params[1..1 + p].iter().sum();
        s[0] = (params[0] - mean * (1.0 - phi_sum)) / sd;
        s
    };
    let from_std = |s: &[f64]| -> Vec<f64> {
        let mut out = s.to_vec();
        let phi_sum: f64 = s[1..1 + p].iter().sum();
        out[0] = s[0] * sd + mean * (1.0 - phi_sum);
        out
    };
    let k = 1 + p + q;
    let mut candidates = Vec::new();
    if let Some(wp) = warm.filter(|v| v.len() == k) {
        candidates.push(to_std(&wp));
    }
    candidates.push(hannan_rissanen(&z, p, q));
    candidates.push(vec![0.0; k]);
    let (mut x, mut obj) = candidates
        .into_iter()
        .map(|c| {
            let o = css(&z, p, q, &c, from, false).0;
            (c, o)
        })
        .find(|(_, o)| o.is_finite())
        .ok_or_else(|| Error::Diverged { iters: 0, last: Box::new(empty_model(order)) })?;

    let mut adam = Adam::new(AdamConfig { lr: opts.lr, ..Default::default() }, k);
    let mut trace = vec![obj];
    let mut iters = 0;
    while iters < opts.max_iters && adam.config.lr > 1e-12 {
        iters += 1;
        let (_, grad, _) = css(&z, p, q, &x, from, true);
        let saved = adam.clone();
        let mut trial = x.clone();
        if adam.step(&mut trial, &grad, |i| format!("arima[{i}]")).is_err() {
            break;
        }
        let o = css(&z, p, q, &trial, from, false).0;
        if o.is_finite() && o <= obj {
            let rel = (obj - o) / obj.abs().max(1e-300);
            x = trial;
            obj = o;
            trace.push(o);
            if rel < opts.tol {
                break;
            }
        } else {
            let lr = adam.config.lr * 0.5;
            adam = saved;
            adam.config.lr = lr;
        }
    }
    let params = from_std(&x);
    let (_, _, e_std) = css(&z, p, q, &x, from, false);
    let residuals: Vec<f64> = e_std.iter().map(|e| e * sd).collect();
    let n_eff = w.len() - from;
    let css_value = residuals[from..].iter().map(|e| e * e).sum::<f64>();
    if !css_value.is_finite() {
        return Err(Error::Diverged { iters, last: Box::new(empty_model(order)) });
    }
    Ok(ArimaModel {
        order,
        intercept: params[0],
        phi: params[1..1 + p].to_vec(),
        theta: params[1 + p..].to_vec(),
        sigma2: css_value / n_eff as f64,
        css: css_value,
        n_eff,
        iterations: iters,
        objective_trace: trace,
        history: series.to_vec(),
        diffs: w,
        residuals,
    })
}

fn empty_model(order: ArimaOrder) -> ArimaModel {
    ArimaModel {
        order,
        intercept: 0.0,
        phi: vec![0.0; order.p],
        theta: vec![0.0; order.q],
        sigma2: f64::NAN,
        css: f64::NAN,
        n_eff: 0,
        iterations: 0,
        objective_trace: vec![],
        history: vec![],
        diffs: vec![],
        residuals: vec![],
    }
}

impl ArimaModel {
    /// `n·ln(CSS/n) + 2(p + q + 1)`.
    pub fn aic(&self) -> f64 {
        let n = self.n_eff as f64;
        n * (self.css / n).ln() + 2.0 * (self.order.p + self.order.q + 1) as f64
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    fn forecast_diff(&self) -> f64 {
        let (w, e) = (&self.diffs, &self.residuals);
        let n = w.len();
        let mut f = self.intercept;
        for (i, phi) in self.phi.iter().enumerate() {
            if n > i {
                f += phi * w[n - 1 - i];
            }
        }
        for (j, th) in self.theta.iter().enumerate() {
            if n > j {
                f += th * e[n - 1 - j];
            }
        }
        f
    }

    /// One-step forecast of the next level value (not clamped).
    pub fn forecast_next(&self) -> f64 {
        let d = self.order.d;
        let y = &self.history;
        let n = y.len();
        let mut f = self.forecast_diff();
        for k in 1..=d {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            f += sign * binomial(d, k) * y[n - k];
        }
        f
    }

    /// Appends an observed value without refitting.
    pub fn observe(&mut self, value: f64) {
        let d = self.order.d;
        let w_hat = self.forecast_diff();
        self.history.push(value);
        let y = &self.history;
        let n = y.len();
        if n > d {
            let w: f64 = (0..=d)
                .map(|k| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(d, k) * y[n - 1 - k]
                })
                .sum();
            self.diffs.push(w);
            self.residuals.push(w - w_hat);
        }
    }

    fn params(&self) -> Vec<f64> {
        let mut v = vec![self.intercept];
        v.extend(&self.phi);
        v.extend(&self.theta);
        v
    }
}

/// Exhaustive AIC search; ties prefer smaller `p + q + d`, then (p, d, q) order.
///
/// Every candidate is scored on the same stretch of the level series, starting after the
/// largest `p + d` in the grid, so AIC values are comparable across orders.
pub fn select_order(series: &[f64], grid: &[ArimaOrder], opts: FitOptions) -> Result<ArimaOrder> {
    let first_level = grid.iter().map(|o| o.p).max().unwrap_or(0) + grid.iter().map(|o| o.d).max().unwrap_or(0);
    let fits: Vec<(ArimaOrder, Option<f64>)> = grid
        .par_iter()
        .map(|&o| {
            let aic = fit_from(series, o, opts, None, first_level).ok().map(|m| m.aic());
            (o, aic.filter(|a| a.is_finite()))
        })
        .collect();
    fits.into_iter()
        .filter_map(|(o, a)| a.map(|a| (o, a)))
        .min_by(|(o1, a1), (o2, a2)| {
            a1.total_cmp(a2)
                .then((o1.p + o1.q + o1.d).cmp(&(o2.p + o2.q + o2.d)))
                .then((o1.p, o1.d, o1.q).cmp(&(o2.p, o2.d, o2.q)))
        })
        .map(|(o, _)| o)
        .ok_or_else(|| Error::Invalid("every ARIMA candidate failed to fit".into()))
}

/// Emits one clamped forecast per test value, then appends that value. With
/// `refit_every = Some(k)` coefficients are re-estimated on the full history every `k`
/// observations.
pub fn rolling_forecast(model: &mut ArimaModel, test: &[f64], refit_every: Option<usize>, opts: FitOptions) -> Vec<f64> {
    let mut out = Vec::with_capacity(test.len());
    for (i, &y) in test.iter().enumerate() {
        out.push(model.forecast_next().max(0.0));
        model.observe(y);
        if let Some(k) = refit_every.filter(|&k| k > 0) {
            if (i + 1) % k == 0 {
                if let Ok(m) = fit_from(&model.history.clone(), model.order, opts, Some(model.params()), model.order.p + model.order.d) {
                    *model = m;
                }
            }
        }
    }
    out
}

/// Writes `poi_id,p,d,q,c,phi_1..,theta_1..`, padding shorter rows with empty cells.
pub fn write_coefficients(path: &Path, models: &[(usize, ArimaModel)]) -> Result<()> {
    let max_p = models.iter().map(|(_, m)| m.order.p).max().unwrap_or(0);
    let max_q = models.iter().map(|(_, m)| m.order.q).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header: Vec<String> = ["poi_id", "p", "d", "q", "c"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=max_p).map(|i| format!("phi_{i}")));
    header.extend((1..=max_q).map(|i| format!("theta_{i}")));
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for (poi, m) in models {
        let mut row = vec![
            poi.to_string(),
            m.order.p.to_string(),
            m.order.d.to_string(),
            m.order.q.to_string(),
            m.intercept.to_string(),
        ];
        row.extend((0..max_p).map(|i| m.phi.get(i).map(|v| v.to_string()).unwrap_or_default()));
        row.extend((0..max_q).map(|i| m.theta.get(i).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn ar1(phi: f64, c: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut y = c / (1.0 - phi);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n + 100 {
            y = c + phi * y + noise.sample(&mut rng);
            out.push(y);
        }
        out.split_off(100)
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[1.0, 3.0, 6.0, 10.0], 1).unwrap(), vec![2.0, 3.0, 4.0]);
        assert_eq!(difference(&[1.0, 2.0], 0).unwrap(), vec![1.0, 2.0]);
        assert!(difference(&[1.0], 1).is_err());
    }

    #[test]
    fn integrate_round_trip() {
        let s = [4.0, -1.0, 2.5, 7.0, 7.0, 3.25];
        for d in 0..=2 {
            let back = integrate(&difference(&s, d).unwrap(), &s[..d], d).unwrap();
            assert_eq!(back, s.to_vec());
        }
    }

    #[test]
    fn white_noise_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(10.0, 2.0).unwrap();
        let s: Vec<f64> = (0..2000).map(|_| noise.sample(&mut rng)).collect();
        let m = fit_css(&s, ArimaOrder::new(0, 0, 0), FitOptions::default()).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let se = 2.0 / (s.len() as f64).sqrt();
        assert!((m.intercept - mean).abs() < 2.0 * se);
    }

    #[test]
    fn ar1_recovery() {
        let s = ar1(0.8, 1.0, 5000, 42);
        let m = fit_css(&s, ArimaOrder::new(1, 0, 0), FitOptions::default()).unwrap();
        assert!((m.phi[0] - 0.8).abs() < 0.05, "phi {}", m.phi[0]);
    }

    #[test]
    fn objective_never_increases() {
        let s = ar1(0.6, 0.0, 800, 7);
        let m = fit_css(&s, ArimaOrder::new(1, 0, 2), FitOptions { max_iters: 300, ..Default::default() }).unwrap();
        assert!(m.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_series_random_walk_order() {
        let s = vec![5.0; 40];
        let mut m = fit_css(&s, ArimaOrder::new(0, 1, 0), FitOptions::default()).unwrap();
        assert!(difference(&s, 1).unwrap().iter().all(|&v| v == 0.0));
        let f = rolling_forecast(&mut m, &[5.0; 5], None, FitOptions::default());
        assert!(f.iter().all(|&v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn random_walk_with_drift_forecast() {
        let s: Vec<f64> = (0..50).map(|t| 2.0 * t as f64 + if t % 2 == 0 { 0.3 } else { -0.3 }).collect();
        let m = fit_css(&s, ArimaOrder::new(0, 1, 0), FitOptions::default()).unwrap();
        let drift = difference(&s, 1).unwrap().iter().sum::<f64>() / 49.0;
        assert!((m.intercept - drift).abs() < 1e-9);
        assert!((m.forecast_next() - (s[49] + drift)).abs() < 1e-9);
    }

    #[test]
    fn constant_intercept_forecast() {
        let mut m = empty_model(ArimaOrder::new(0, 0, 0));
        m.intercept = 3.5;
        m.history = vec![1.0];
        m.diffs = vec![1.0];
        m.residuals = vec![0.0];
        let f = rolling_forecast(&mut m, &[9.0, 0.0, 2.0], None, FitOptions::default());
        assert_eq!(f, vec![3.5; 3]);
    }

    #[test]
    fn ar1_recursion_and_causality() {
        let s = ar1(0.5, 2.0, 300, 1);
        let mut m = fit_css(&s, ArimaOrder::new(1, 0, 0), FitOptions::default()).unwrap();
        let test = ar1(0.5, 2.0, 20, 2);
        let (c, phi) = (m.intercept, m.phi[0]);
        let preds = rolling_forecast(&mut m, &test, None, FitOptions::default());
        assert_eq!(m.history().len(), s.len() + test.len());
        let mut prev = *s.last().unwrap();
        for (p, y) in preds.iter().zip(&test) {
            assert!((p - (c + phi * prev).max(0.0)).abs() < 1e-12);
            prev = *y;
        }
    }

    #[test]
    fn forecasts_are_nonnegative() {
        let s: Vec<f64> = (0..60).map(|t| 100.0 - 3.0 * t as f64).collect();
        let mut m = fit_css(&s, ArimaOrder::new(0, 1, 0), FitOptions::default()).unwrap();
        let f = rolling_forecast(&mut m, &[0.5, 0.2, 0.0], None, FitOptions::default());
        assert!(f.iter().all(|&v| v >= 0.0));
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn order_selection_small_grids() {
        let s = ar1(0.8, 1.0, 600, 5);
        let o = ArimaOrder::new(2, 0, 1);
        assert_eq!(select_order(&s, &[o], FitOptions::default()).unwrap(), o);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let trend: Vec<f64> = (0..600).map(|t| 0.5 * t as f64 + noise.sample(&mut rng)).collect();
        let sel = select_order(&trend, &ArimaOrder::grid(1, 1, 1), FitOptions::default()).unwrap();
        assert!(sel.d >= 1, "{sel:?}");
    }

    #[test]
    fn too_short_series_is_rejected() {
        assert!(matches!(
            fit_css(&[1.0; 8], ArimaOrder::new(1, 0, 0), FitOptions::default()),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn coefficient_csv_pads_rows() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("arima.csv");
        let s = ar1(0.5, 0.0, 200, 3);
        let a = fit_css(&s, ArimaOrder::new(1, 0, 0), FitOptions::default()).unwrap();
        let b = fit_css(&s, ArimaOrder::new(0, 0, 2), FitOptions::default()).unwrap();
        write_coefficients(&p, &[(0, a), (1, b)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "poi_id,p,d,q,c,phi_1,theta_1,theta_2");
        assert!(lines.next().unwrap().ends_with(",,"));
    }
}
