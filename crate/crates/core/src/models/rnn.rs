use super::kernel::{add_outer, add_transposed, affine, readout};
use super::{PredictionSink, RecurrentModel, StepSource, Trace};

/// `tanh(W_rec·h + W_in·x + b)`.
pub fn rnn_step(model: &RecurrentModel, h: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; model.hidden_size];
    affine(&mut z, model.param("w_rec"), h, model.param("w_in"), x, model.param("b"));
    z.iter().map(|v| v.tanh()).collect()
}

pub(super) fn forward<S: StepSource + ?Sized>(m: &RecurrentModel, src: &S, mut sink: Option<PredictionSink<'_>>) -> Trace {
    let mut trace = Trace { states: vec![vec![0.0; m.hidden_size]], ..Default::default() };
    let (w_out, b_out) = (m.param("w_out"), m.param("b_out"));
    for t in 0..src.steps() {
        let x = src.input(t).to_vec();
        let h = rnn_step(m, &trace.states[t], &x);
        let pred = readout(w_out, b_out, &h);
        if let Some(s) = sink.as_mut() {
            s(t, &pred);
        }
        trace.preds.extend_from_slice(&pred);
        trace.states.push(h);
        trace.inputs.push(x);
    }
    trace
}

pub(super) fn backward(m: &RecurrentModel, trace: &Trace, dpred: &[f64]) -> Vec<f64> {
    let (h_n, p) = (m.hidden_size, m.output_size);
    let l = &m.layout;
    let mut g = vec![0.0; l.total()];
    let w_out = m.param("w_out");
    let w_rec = m.param("w_rec");
    let mut dh_next = vec![0.0; h_n];
    for t in (0..trace.inputs.len()).rev() {
        let h = &trace.states[t + 1];
        let dy = &dpred[t * p..(t + 1) * p];
        add_outer(&mut g[l.range("w_out")], dy, h);
        for (gb, d) in g[l.range("b_out")].iter_mut().zip(dy) {
            *gb += d;
        }
        let mut dh = dh_next.clone();
        add_transposed(&mut dh, w_out, dy);
        let dz: Vec<f64> = dh.iter().zip(h).map(|(d, h)| d * (1.0 - h * h)).collect();
        add_outer(&mut g[l.range("w_rec")], &dz, &trace.states[t]);
        add_outer(&mut g[l.range("w_in")], &dz, &trace.inputs[t]);
        for (gb, d) in g[l.range("b")].iter_mut().zip(&dz) {
            *gb += d;
        }
        dh_next = vec![0.0; h_n];
        add_transposed(&mut dh_next, w_rec, &dz);
    }
    g
}
