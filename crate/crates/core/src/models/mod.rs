//! Forecasting models: the naive baseline and four recurrent architectures with
//! hand-derived backpropagation through time.
//!
//! All recurrent models read a [`StepSource`] one step at a time and emit one POI
//! prediction vector per step. Parameters live in a single flat vector described by a
//! [`Layout`], which is what the optimizer, the gradient checker and checkpoints see.

mod ctgrn;
mod ctrnn;
mod gradcheck;
mod kernel;
mod loss;
mod lstm;
mod naive;
mod rnn;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use ctgrn::ctgrn_step;
pub use ctrnn::ctrnn_step;
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use loss::{Loss, LossKind};
pub use lstm::lstm_step;
pub use naive::naive_forecast;
pub use rnn::rnn_step;

use crate::error::{Error, Result};
use crate::geo::NormalizedAdjacency;

/// Sequential access to one window of model inputs.
///
/// `input(t)` is the exogenous input for step t; `observation(t)` is the per-node
/// observation at hour `t` of the window (graph models only, `0..=steps()`). A model
/// predicting step t (the hour after `t`) may read inputs and observations up to `t`.
pub trait StepSource {
    fn steps(&self) -> usize;
    fn input(&self, t: usize) -> &[f64];
    fn observation(&self, t: usize) -> &[f64];
}

/// Validates widths on access; a bad step reads as zeros and the first problem is kept.
struct Checked<'a, S: ?Sized> {
    src: &'a S,
    input: usize,
    nodes: Option<usize>,
    zeros: Vec<f64>,
    error: std::cell::RefCell<Option<String>>,
}

impl<'a, S: StepSource + ?Sized> Checked<'a, S> {
    fn new(src: &'a S, input: usize, nodes: Option<usize>) -> Self {
        let zeros = vec![0.0; input.max(nodes.unwrap_or(0))];
        Checked { src, input, nodes, zeros, error: Default::default() }
    }

    fn flag(&self, msg: impl FnOnce() -> String) {
        let mut e = self.error.borrow_mut();
        if e.is_none() {
            *e = Some(msg());
        }
    }
}

impl<S: StepSource + ?Sized> StepSource for Checked<'_, S> {
    fn steps(&self) -> usize {
        self.src.steps()
    }

    fn input(&self, t: usize) -> &[f64] {
        let x = self.src.input(t);
        if x.len() == self.input {
            return x;
        }
        self.flag(|| format!("input width {} at step {t}, model expects {}", x.len(), self.input));
        &self.zeros[..self.input]
    }

    fn observation(&self, t: usize) -> &[f64] {
        let o = self.src.observation(t);
        match self.nodes {
            Some(n) if o.len() != n => {
                self.flag(|| format!("observation width {} at step {t}, graph has {n} nodes", o.len()));
                &self.zeros[..n]
            }
            _ => o,
        }
    }
}

/// Plain in-memory step source, handy for tests and single-sequence calls.
#[derive(Debug, Clone, Default)]
pub struct Sequence {
    pub inputs: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
}

impl StepSource for Sequence {
    fn steps(&self) -> usize {
        self.inputs.len()
    }

    fn input(&self, t: usize) -> &[f64] {
        &self.inputs[t]
    }

    fn observation(&self, t: usize) -> &[f64] {
        self.observations.get(t).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arch {
    #[serde(rename = "vanilla-rnn")]
    Rnn,
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "ct-rnn")]
    CtRnn,
    #[serde(rename = "ct-grn")]
    CtGrn,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Rnn, Arch::Lstm, Arch::CtRnn, Arch::CtGrn];

    pub fn tag(self) -> &'static str {
        match self {
            Arch::Rnn => "vanilla-rnn",
            Arch::Lstm => "lstm",
            Arch::CtRnn => "ct-rnn",
            Arch::CtGrn => "ct-grn",
        }
    }

    /// Short name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Arch::Rnn => "rnn",
            Arch::Lstm => "lstm",
            Arch::CtRnn => "ctrnn",
            Arch::CtGrn => "ctgrn",
        }
    }

    pub fn is_graph(self) -> bool {
        self == Arch::CtGrn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Forcing {
    Off,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named blocks of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub specs: Vec<ParamSpec>,
}

impl Layout {
    fn from_shapes(shapes: &[(&str, usize, usize)]) -> Self {
        let mut offset = 0;
        let specs = shapes
            .iter()
            .map(|&(name, rows, cols)| {
                let s = ParamSpec { name: name.to_string(), rows, cols, offset };
                offset += rows * cols;
                s
            })
            .collect();
        Layout { specs }
    }

    pub fn for_arch(arch: Arch, input: usize, hidden: usize, output: usize) -> Self {
        match arch {
            Arch::Rnn => Self::from_shapes(&[
                ("w_in", hidden, input),
                ("w_rec", hidden, hidden),
                ("b", hidden, 1),
                ("w_out", output, hidden),
                ("b_out", output, 1),
            ]),
            Arch::Lstm => Self::from_shapes(&[
                ("w_in", 4 * hidden, input),
                ("w_rec", 4 * hidden, hidden),
                ("b", 4 * hidden, 1),
                ("w_out", output, hidden),
                ("b_out", output, 1),
            ]),
            Arch::CtRnn => Self::from_shapes(&[
                ("w_in", hidden, input),
                ("w_rec", hidden, hidden),
                ("b", hidden, 1),
                ("a", hidden, 1),
                ("tau_raw", hidden, 1),
                ("w_out", output, hidden),
                ("b_out", output, 1),
            ]),
            Arch::CtGrn => Self::from_shapes(&[
                ("w_in", hidden, input),
                ("w_rec", hidden, hidden),
                ("b", hidden, 1),
                ("a", hidden, 1),
                ("tau_raw", hidden, 1),
            ]),
        }
    }

    pub fn total(&self) -> usize {
        self.specs.last().map_or(0, |s| s.offset + s.len())
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn range(&self, name: &str) -> std::ops::Range<usize> {
        self.get(name).unwrap_or_else(|| panic!("no parameter {name}")).range()
    }

    /// `name[row,col]` for a flat index.
    pub fn describe(&self, idx: usize) -> String {
        for s in &self.specs {
            if s.range().contains(&idx) {
                let k = idx - s.offset;
                return format!("{}[{},{}]", s.name, k / s.cols, k % s.cols);
            }
        }
        format!("#{idx}")
    }
}

/// Street-graph structure a CT-GRN is bound to.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBinding {
    pub adjacency: NormalizedAdjacency,
    /// Node index of each POI, by poi id.
    pub poi_nodes: Vec<usize>,
    pub graph_hash: String,
}

impl GraphBinding {
    pub fn is_poi(&self) -> Vec<bool> {
        let mut m = vec![false; self.adjacency.size()];
        for &p in &self.poi_nodes {
            m[p] = true;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentModel {
    pub arch: Arch,
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    /// Euler step in hours for the continuous-time models.
    pub dt: f64,
    pub forcing: Forcing,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub graph: Option<Arc<GraphBinding>>,
}

/// Per-step intermediates kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `steps × output_size` predictions in model space.
    pub preds: Vec<f64>,
    /// State entering each step; `states[t + 1]` follows step t (after any forcing).
    pub(crate) states: Vec<Vec<f64>>,
    /// rnn: unused; lstm: gate activations; ct models: tanh of the pre-activation.
    pub(crate) acts: Vec<Vec<f64>>,
    /// lstm cell states, same indexing as `states`.
    pub(crate) cells: Vec<Vec<f64>>,
    pub(crate) inputs: Vec<Vec<f64>>,
}

pub type PredictionSink<'a> = &'a mut dyn FnMut(usize, &[f64]);

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl RecurrentModel {
    /// All-zero parameters (`a`, `tau_raw` and biases included).
    pub fn zeros(
        arch: Arch,
        input_size: usize,
        hidden_size: usize,
        output_size: usize,
        graph: Option<Arc<GraphBinding>>,
    ) -> Result<Self> {
        let output_size = match (&graph, arch) {
            (Some(g), Arch::CtGrn) => {
                if g.adjacency.size() != hidden_size {
                    return Err(Error::Shape(format!(
                        "ct-grn needs one neuron per node: hidden {hidden_size}, nodes {}",
                        g.adjacency.size()
                    )));
                }
                g.poi_nodes.len()
            }
            (None, Arch::CtGrn) => return Err(Error::Invalid("ct-grn requires a graph".into())),
            _ => output_size,
        };
        let layout = Layout::for_arch(arch, input_size, hidden_size, output_size);
        let params = vec![0.0; layout.total()];
        Ok(RecurrentModel {
            arch,
            input_size,
            hidden_size,
            output_size,
            dt: 1.0,
            forcing: if arch.is_graph() { Forcing::Mixed } else { Forcing::Off },
            layout,
            params,
            graph: if arch.is_graph() { graph } else { None },
        })
    }

    /// Glorot-uniform weights, zero biases, `a = 1`, `tau_raw = 0`, LSTM forget bias 1.
    pub fn init<R: Rng>(
        arch: Arch,
        input_size: usize,
        hidden_size: usize,
        output_size: usize,
        graph: Option<Arc<GraphBinding>>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut m = Self::zeros(arch, input_size, hidden_size, output_size, graph)?;
        let gates = if arch == Arch::Lstm { 4 } else { 1 };
        for spec in m.layout.specs.clone() {
            let values = &mut m.params[spec.range()];
            match spec.name.as_str() {
                "w_in" | "w_rec" | "w_out" => {
                    let fan_out = spec.rows / if spec.name == "w_out" { 1 } else { gates };
                    let limit = (6.0 / (spec.cols + fan_out).max(1) as f64).sqrt();
                    for v in values.iter_mut() {
                        *v = rng.random_range(-limit..=limit);
                    }
                }
                "a" => values.fill(1.0),
                "b" if arch == Arch::Lstm => values[hidden_size..2 * hidden_size].fill(1.0),
                _ => {}
            }
        }
        Ok(m)
    }

    pub fn param(&self, name: &str) -> &[f64] {
        &self.params[self.layout.range(name)]
    }

    pub fn param_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self.layout.range(name);
        &mut self.params[r]
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Effective time constants `sigmoid(tau_raw)`.
    pub fn tau(&self) -> Vec<f64> {
        self.param("tau_raw").iter().map(|&r| sigmoid(r)).collect()
    }

    /// Runs the sequence, calling `sink(t, pred)` as soon as each prediction exists.
    ///
    /// Widths are validated as each step is read, so nothing past step t is touched before
    /// prediction t is emitted.
    pub fn forward<S: StepSource + ?Sized>(&self, src: &S, sink: Option<PredictionSink<'_>>) -> Result<Trace> {
        let nodes = self.arch.is_graph().then_some(self.hidden_size);
        let checked = Checked::new(src, self.input_size, nodes);
        let trace = match self.arch {
            Arch::Rnn => rnn::forward(self, &checked, sink),
            Arch::Lstm => lstm::forward(self, &checked, sink),
            Arch::CtRnn => ctrnn::forward(self, &checked, sink),
            Arch::CtGrn => ctgrn::forward(self, &checked, sink),
        };
        match checked.error.into_inner() {
            Some(msg) => Err(Error::Shape(msg)),
            None => Ok(trace),
        }
    }

    /// Gradient of `Σ_t dpred_t · pred_t` with respect to every parameter.
    pub fn backward(&self, trace: &Trace, dpred: &[f64]) -> Vec<f64> {
        match self.arch {
            Arch::Rnn => rnn::backward(self, trace, dpred),
            Arch::Lstm => lstm::backward(self, trace, dpred),
            Arch::CtRnn => ctrnn::backward(self, trace, dpred),
            Arch::CtGrn => ctgrn::backward(self, trace, dpred),
        }
    }

    /// Mean loss over all `steps × outputs` cells and its parameter gradient.
    pub fn loss_and_grad<S: StepSource + ?Sized>(
        &self,
        src: &S,
        targets: &[f64],
        loss: Loss,
    ) -> Result<(f64, Vec<f64>)> {
        let trace = self.forward(src, None)?;
        let (value, dpred) = loss.evaluate(&trace.preds, targets)?;
        Ok((value, self.backward(&trace, &dpred)))
    }

    pub fn loss_only<S: StepSource + ?Sized>(&self, src: &S, targets: &[f64], loss: Loss) -> Result<f64> {
        let trace = self.forward(src, None)?;
        Ok(loss.evaluate(&trace.preds, targets)?.0)
    }
}
