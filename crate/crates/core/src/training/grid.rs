use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::key_values;
use crate::error::{Error, Result};
use crate::models::{Arch, LossKind};
use crate::series::csv_io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub archs: Vec<Arch>,
    pub losses: Vec<LossKind>,
    pub hidden_sizes: Vec<usize>,
    pub normalize: Vec<bool>,
    pub runs: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            archs: Arch::ALL.to_vec(),
            losses: LossKind::ALL.to_vec(),
            hidden_sizes: vec![32, 64, 128],
            normalize: vec![true, false],
            runs: 3,
        }
    }
}

fn parse_list<T>(file: &str, line: usize, v: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| f(s.trim()).ok_or_else(|| Error::parse(file, line, format!("bad list entry {s:?}"))))
        .collect()
}

pub(crate) fn arch_from_cli(s: &str) -> Option<Arch> {
    Arch::ALL.into_iter().find(|a| a.cli_name() == s || a.tag() == s)
}

impl GridSpec {
    /// Parses `archs`, `losses`, `hidden_sizes`, `normalize` and `runs` keys; omitted
    /// keys keep their defaults.
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut g = GridSpec::default();
        for (line, key, v) in key_values(file, text)? {
            match key {
                "archs" => g.archs = parse_list(file, line, v, arch_from_cli)?,
                "losses" => g.losses = parse_list(file, line, v, |s| s.parse().ok())?,
                "hidden_sizes" => g.hidden_sizes = parse_list(file, line, v, |s| s.parse().ok())?,
                "normalize" => g.normalize = parse_list(file, line, v, |s| s.parse().ok())?,
                "runs" => g.runs = v.parse().map_err(|_| Error::parse(file, line, "bad runs"))?,
                _ => return Err(Error::parse(file, line, format!("unknown key {key:?}"))),
            }
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &loss in &self.losses {
            for &hidden_size in &self.hidden_sizes {
                for &normalize_visitors in &self.normalize {
                    out.push(GridCell { loss, hidden_size, normalize_visitors });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub loss: LossKind,
    pub hidden_size: usize,
    pub normalize_visitors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub mae: f64,
    pub rmse: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct GridRow<A> {
    pub arch: Arch,
    pub cell: GridCell,
    pub run: usize,
    pub seed: u64,
    /// `Err` holds the failure message of a cell that could not be trained.
    pub outcome: std::result::Result<RunOutcome, String>,
    pub artifact: Option<A>,
}

#[derive(Debug, Clone)]
pub struct BestCell<A> {
    pub arch: Arch,
    pub cell: GridCell,
    pub mean_mae: f64,
    pub mean_rmse: f64,
    /// Artifact of the lowest-RMSE run inside the winning cell.
    pub artifact: Option<A>,
}

#[derive(Debug, Clone)]
pub struct GridResult<A> {
    pub rows: Vec<GridRow<A>>,
    pub best: Vec<BestCell<A>>,
}

/// Runs `runner(arch, cell, seed)` for every architecture, cell and run seed
/// `seed..seed + runs`, then keeps the cell with the lowest mean RMSE per architecture.
///
/// A failing run marks its row failed and disqualifies its cell; the other cells go on.
pub fn grid_search<A, F>(spec: &GridSpec, seed: u64, runner: F) -> Result<GridResult<A>>
where
    A: Send + Clone,
    F: Fn(Arch, GridCell, u64) -> Result<(RunOutcome, A)> + Sync,
{
    let cells = spec.cells();
    if cells.is_empty() || spec.archs.is_empty() || spec.runs == 0 {
        return Err(Error::Invalid("empty search grid".into()));
    }
    crate::parallel::init();
    let mut jobs = Vec::new();
    for &arch in &spec.archs {
        for &cell in &cells {
            for run in 0..spec.runs {
                jobs.push((arch, cell, run));
            }
        }
    }
    let rows: Vec<GridRow<A>> = jobs
        .into_par_iter()
        .map(|(arch, cell, run)| {
            let s = seed + run as u64;
            let (outcome, artifact) = match runner(arch, cell, s) {
                Ok((o, a)) if o.mae.is_finite() && o.rmse.is_finite() => (Ok(o), Some(a)),
                Ok(_) => (Err("non-finite metrics".to_string()), None),
                Err(e) => (Err(e.to_string()), None),
            };
            GridRow { arch, cell, run, seed: s, outcome, artifact }
        })
        .collect();

    let mut best = Vec::new();
    for &arch in &spec.archs {
        let mut winner: Option<BestCell<A>> = None;
        for &cell in &cells {
            let runs: Vec<&GridRow<A>> = rows.iter().filter(|r| r.arch == arch && r.cell == cell).collect();
            let ok: Vec<RunOutcome> = runs.iter().filter_map(|r| r.outcome.clone().ok()).collect();
            if ok.len() != runs.len() {
                continue;
            }
            let n = ok.len() as f64;
            let mean_rmse = ok.iter().map(|o| o.rmse).sum::<f64>() / n;
            let mean_mae = ok.iter().map(|o| o.mae).sum::<f64>() / n;
            if winner.as_ref().is_none_or(|w| mean_rmse < w.mean_rmse) {
                let top = runs
                    .iter()
                    .min_by(|a, b| a.outcome.as_ref().unwrap().rmse.total_cmp(&b.outcome.as_ref().unwrap().rmse))
                    .unwrap();
                winner = Some(BestCell { arch, cell, mean_mae, mean_rmse, artifact: top.artifact.clone() });
            }
        }
        best.extend(winner);
    }
    Ok(GridResult { rows, best })
}

impl<A> GridResult<A> {
    /// `arch,loss,size,norm,run,mae,rmse,train_seconds`; failed runs show `failed`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["arch", "loss", "size", "norm", "run", "mae", "rmse", "train_seconds"])
            .map_err(|e| csv_io(path, e))?;
        for r in &self.rows {
            let (mae, rmse, secs) = match &r.outcome {
                Ok(o) => (o.mae.to_string(), o.rmse.to_string(), o.train_seconds.to_string()),
                Err(_) => ("failed".into(), "failed".into(), String::new()),
            };
            w.write_record([
                r.arch.cli_name().to_string(),
                r.cell.loss.name().to_string(),
                r.cell.hidden_size.to_string(),
                r.cell.normalize_visitors.to_string(),
                r.run.to_string(),
                mae,
                rmse,
                secs,
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::predict_dataset;
    use crate::eval::Metrics;
    use crate::features::{DatasetOptions, InputSet};
    use crate::models::RecurrentModel;
    use crate::training::tests::toy_dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn outcome_of(model: &RecurrentModel, opts: DatasetOptions) -> RunOutcome {
        let (_, test) = toy_dataset(600, 300, opts);
        let tr = predict_dataset(model, &test).unwrap();
        let m = Metrics::of(&tr.pred, &tr.truth).unwrap();
        RunOutcome { mae: m.mae, rmse: m.rmse, train_seconds: 0.0 }
    }

    #[test]
    fn single_cell_grid() {
        let spec = GridSpec {
            archs: vec![Arch::Rnn],
            losses: vec![LossKind::Mae],
            hidden_sizes: vec![4],
            normalize: vec![true],
            runs: 3,
        };
        let res = grid_search(&spec, 10, |_, _, s| Ok((RunOutcome { mae: 1.0, rmse: s as f64, train_seconds: 0.0 }, s)))
            .unwrap();
        assert_eq!(res.rows.len(), 3);
        assert_eq!(res.best.len(), 1);
        assert_eq!(res.best[0].cell, spec.cells()[0]);
        assert_eq!(res.best[0].mean_rmse, 11.0);
        assert_eq!(res.best[0].artifact, Some(10));
        let seeds: Vec<u64> = res.rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![10, 11, 12]);
    }

    #[test]
    fn planted_winner_is_selected() {
        // the planted RNN outputs each POI's mean scaled target through its bias; every
        // other cell is an untrained random initialization
        let spec = GridSpec {
            archs: vec![Arch::Rnn, Arch::Lstm],
            losses: vec![LossKind::Mse, LossKind::Mae],
            hidden_sizes: vec![2, 3],
            normalize: vec![true],
            runs: 3,
        };
        let planted = GridCell { loss: LossKind::Mae, hidden_size: 3, normalize_visitors: true };
        let opts = DatasetOptions { inputs: InputSet::Visitors, ..Default::default() };
        let res = grid_search(&spec, 0, |arch, cell, seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + cell.hidden_size as u64);
            let mut m = RecurrentModel::init(arch, 2, cell.hidden_size, 2, None, &mut rng).unwrap();
            if arch == Arch::Rnn && cell == planted {
                m.params.fill(0.0);
                let (_, test) = toy_dataset(600, 300, opts);
                let p = test.output_width;
                let n = test.len() * test.seq_len;
                for k in 0..p {
                    let mean: f64 = test.windows.iter().flat_map(|w| w.targets.iter().skip(k).step_by(p)).sum::<f64>()
                        / n as f64;
                    m.param_mut("b_out")[k] = mean;
                }
            }
            Ok((outcome_of(&m, opts), ()))
        })
        .unwrap();
        assert_eq!(res.rows.len(), 2 * 4 * 3);
        let rnn = res.best.iter().find(|b| b.arch == Arch::Rnn).unwrap();
        assert_eq!(rnn.cell, planted);
    }

    #[test]
    fn failed_cells_are_marked_and_skipped() {
        let spec = GridSpec {
            archs: vec![Arch::CtRnn],
            losses: vec![LossKind::Mse],
            hidden_sizes: vec![1, 2],
            normalize: vec![false],
            runs: 3,
        };
        let res = grid_search(&spec, 0, |_, cell, seed| {
            if cell.hidden_size == 1 && seed == 1 {
                return Err(Error::NonFiniteLoss { epoch: 0, batch: 0 });
            }
            Ok((RunOutcome { mae: 0.5, rmse: 1.0 / cell.hidden_size as f64 + 1.0, train_seconds: 0.0 }, ()))
        })
        .unwrap();
        assert_eq!(res.rows.iter().filter(|r| r.outcome.is_err()).count(), 1);
        assert_eq!(res.best[0].cell.hidden_size, 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.csv");
        res.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.contains("failed"));
    }

    #[test]
    fn grid_file_parsing() {
        let g = GridSpec::parse("g", "archs = rnn, ctgrn\nlosses = mae\nhidden_sizes = 8,16\nruns = 2\n").unwrap();
        assert_eq!(g.archs, vec![Arch::Rnn, Arch::CtGrn]);
        assert_eq!(g.cells().len(), 2 * 2);
        assert!(GridSpec::parse("g", "archs = gru\n").is_err());
    }
}
