use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AdamConfig;
use crate::error::{Error, Result};
use crate::features::InputSet;
use crate::models::{Loss, LossKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seq_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub loss: LossKind,
    pub huber_delta: f64,
    pub hidden_size: usize,
    pub normalize_visitors: bool,
    pub inputs: InputSet,
    pub seed: u64,
    /// Enables early stopping on the last tenth of the training windows.
    pub patience: Option<usize>,
    /// Global gradient-norm clip; off by default.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seq_len: 30,
            batch_size: 16,
            epochs: 300,
            adam: AdamConfig::default(),
            loss: LossKind::Mse,
            huber_delta: 1.0,
            hidden_size: 32,
            normalize_visitors: true,
            inputs: InputSet::Features,
            seed: 0,
            patience: None,
            clip_norm: None,
        }
    }
}

fn parse_value<T: FromStr>(file: &str, line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::parse(file, line, format!("bad value {v:?} for {key}")))
}

fn parse_option<T: FromStr>(file: &str, line: usize, key: &str, v: &str) -> Result<Option<T>> {
    if matches!(v, "none" | "off" | "") {
        Ok(None)
    } else {
        parse_value(file, line, key, v).map(Some)
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub(crate) fn key_values<'a>(file: &str, text: &'a str) -> Result<Vec<(usize, &'a str, &'a str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(file, i + 1, "expected key = value"))?;
        out.push((i + 1, k.trim(), v.trim()));
    }
    Ok(out)
}

impl TrainConfig {
    pub fn loss_fn(&self) -> Loss {
        Loss { kind: self.loss, huber_delta: self.huber_delta }
    }

    /// Applies `key = value` overrides on top of the defaults.
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        for (line, key, v) in key_values(file, text)? {
            match key {
                "seq_len" => c.seq_len = parse_value(file, line, key, v)?,
                "batch_size" => c.batch_size = parse_value(file, line, key, v)?,
                "epochs" => c.epochs = parse_value(file, line, key, v)?,
                "lr" => c.adam.lr = parse_value(file, line, key, v)?,
                "beta1" => c.adam.beta1 = parse_value(file, line, key, v)?,
                "beta2" => c.adam.beta2 = parse_value(file, line, key, v)?,
                "eps" => c.adam.eps = parse_value(file, line, key, v)?,
                "loss" => c.loss = parse_value(file, line, key, v)?,
                "huber_delta" => c.huber_delta = parse_value(file, line, key, v)?,
                "hidden_size" => c.hidden_size = parse_value(file, line, key, v)?,
                "normalize_visitors" => c.normalize_visitors = parse_value(file, line, key, v)?,
                "inputs" => {
                    c.inputs = <InputSet as clap::ValueEnum>::from_str(v, true)
                        .map_err(|_| Error::parse(file, line, format!("bad value {v:?} for inputs")))?
                }
                "seed" => c.seed = parse_value(file, line, key, v)?,
                "patience" => c.patience = parse_option(file, line, key, v)?,
                "clip_norm" => c.clip_norm = parse_option(file, line, key, v)?,
                _ => return Err(Error::parse(file, line, format!("unknown key {key:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("seq_len", self.seq_len as f64),
            ("batch_size", self.batch_size as f64),
            ("lr", self.adam.lr),
            ("eps", self.adam.eps),
            ("huber_delta", self.huber_delta),
            ("hidden_size", self.hidden_size as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        for (name, b) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Invalid(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.patience == Some(0) {
            return Err(Error::Invalid("patience must be positive".into()));
        }
        Ok(())
    }

    /// Inverse of [`TrainConfig::parse`].
    pub fn to_key_values(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let _ = writeln!(s, "seq_len = {}", self.seq_len);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "lr = {:?}", self.adam.lr);
        let _ = writeln!(s, "beta1 = {:?}", self.adam.beta1);
        let _ = writeln!(s, "beta2 = {:?}", self.adam.beta2);
        let _ = writeln!(s, "eps = {:?}", self.adam.eps);
        let _ = writeln!(s, "loss = {}", self.loss.name());
        let _ = writeln!(s, "huber_delta = {:?}", self.huber_delta);
        let _ = writeln!(s, "hidden_size = {}", self.hidden_size);
        let _ = writeln!(s, "normalize_visitors = {}", self.normalize_visitors);
        let inputs = <InputSet as clap::ValueEnum>::to_possible_value(&self.inputs).unwrap();
        let _ = writeln!(s, "inputs = {}", inputs.get_name());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "patience = {}", opt(self.patience.map(|p| p.to_string())));
        let _ = writeln!(s, "clip_norm = {}", opt(self.clip_norm.map(|c| format!("{c:?}"))));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = TrainConfig::default();
        assert_eq!((c.seq_len, c.batch_size, c.epochs), (30, 16, 300));
        assert_eq!(c.adam, AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 });
        assert!(c.patience.is_none() && c.clip_norm.is_none());
    }

    #[test]
    fn parse_overrides_and_round_trip() {
        let text = "# quick run\nepochs = 5\nloss = mae  # robust\nhidden_size=64\npatience = 3\ninputs = geo\n";
        let c = TrainConfig::parse("cfg", text).unwrap();
        assert_eq!(c.epochs, 5);
        assert_eq!(c.loss, LossKind::Mae);
        assert_eq!(c.hidden_size, 64);
        assert_eq!(c.patience, Some(3));
        assert_eq!(c.inputs, InputSet::Geo);
        assert_eq!(TrainConfig::parse("cfg", &c.to_key_values()).unwrap(), c);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = TrainConfig::parse("cfg", "epochs = 3\nwat = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(TrainConfig::parse("cfg", "lr = -1\n").is_err());
        assert!(TrainConfig::parse("cfg", "epochs\n").is_err());
    }
}
