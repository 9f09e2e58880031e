use super::kernel::{add_outer, add_transposed, affine, readout};
use super::{sigmoid, PredictionSink, RecurrentModel, StepSource, Trace};

/// Gate activations `[i, f, g, o]` and the new `(h, c)`.
fn lstm_gates(model: &RecurrentModel, h: &[f64], c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = model.hidden_size;
    let mut z = vec![0.0; 4 * n];
    affine(&mut z, model.param("w_rec"), h, model.param("w_in"), x, model.param("b"));
    let mut gates = z;
    for (k, v) in gates.iter_mut().enumerate() {
        *v = if (2 * n..3 * n).contains(&k) { v.tanh() } else { sigmoid(*v) };
    }
    let mut c_new = vec![0.0; n];
    let mut h_new = vec![0.0; n];
    for j in 0..n {
        let (i, f, g, o) = (gates[j], gates[n + j], gates[2 * n + j], gates[3 * n + j]);
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    (gates, h_new, c_new)
}

/// One LSTM step with input, forget, candidate and output gates.
pub fn lstm_step(model: &RecurrentModel, h: &[f64], c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (_, h, c) = lstm_gates(model, h, c, x);
    (h, c)
}

pub(super) fn forward<S: StepSource + ?Sized>(m: &RecurrentModel, src: &S, mut sink: Option<PredictionSink<'_>>) -> Trace {
    let n = m.hidden_size;
    let mut trace = Trace { states: vec![vec![0.0; n]], cells: vec![vec![0.0; n]], ..Default::default() };
    let (w_out, b_out) = (m.param("w_out"), m.param("b_out"));
    for t in 0..src.steps() {
        let x = src.input(t).to_vec();
        let (gates, h, c) = lstm_gates(m, &trace.states[t], &trace.cells[t], &x);
        let pred = readout(w_out, b_out, &h);
        if let Some(s) = sink.as_mut() {
            s(t, &pred);
        }
        trace.preds.extend_from_slice(&pred);
        trace.states.push(h);
        trace.cells.push(c);
        trace.acts.push(gates);
        trace.inputs.push(x);
    }
    trace
}

pub(super) fn backward(m: &RecurrentModel, trace: &Trace, dpred: &[f64]) -> Vec<f64> {
    let (n, p) = (m.hidden_size, m.output_size);
    let l = &m.layout;
    let mut g = vec![0.0; l.total()];
    let (w_out, w_rec) = (m.param("w_out"), m.param("w_rec"));
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    for t in (0..trace.inputs.len()).rev() {
        let h = &trace.states[t + 1];
        let (c_prev, c) = (&trace.cells[t], &trace.cells[t + 1]);
        let gates = &trace.acts[t];
        let dy = &dpred[t * p..(t + 1) * p];
        add_outer(&mut g[l.range("w_out")], dy, h);
        for (gb, d) in g[l.range("b_out")].iter_mut().zip(dy) {
            *gb += d;
        }
        let mut dh = dh_next.clone();
        add_transposed(&mut dh, w_out, dy);
        let mut dz = vec![0.0; 4 * n];
        for j in 0..n {
            let (i, f, gg, o) = (gates[j], gates[n + j], gates[2 * n + j], gates[3 * n + j]);
            let tc = c[j].tanh();
            let d_o = dh[j] * tc;
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            let d_i = dc * gg;
            let d_g = dc * i;
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[n + j] = d_f * f * (1.0 - f);
            dz[2 * n + j] = d_g * (1.0 - gg * gg);
            dz[3 * n + j] = d_o * o * (1.0 - o);
        }
        add_outer(&mut g[l.range("w_rec")], &dz, &trace.states[t]);
        add_outer(&mut g[l.range("w_in")], &dz, &trace.inputs[t]);
        for (gb, d) in g[l.range("b")].iter_mut().zip(&dz) {
            *gb += d;
        }
        dh_next = vec![0.0; n];
        add_transposed(&mut dh_next, w_rec, &dz);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_util::random_model;
    use crate::models::Arch;

    #[test]
    fn saturated_forget_keeps_cell() {
        let mut m = RecurrentModel::zeros(Arch::Lstm, 2, 3, 1, None).unwrap();
        let b = m.param_mut("b");
        b[..3].fill(-1000.0); // input gate closed
        b[3..6].fill(1000.0); // forget gate open
        let c = [0.3, -1.2, 2.5];
        let (_, c2) = lstm_step(&m, &[0.1, 0.2, 0.3], &c, &[0.5, 0.5]);
        assert_eq!(c2, c.to_vec());
    }

    #[test]
    fn zero_parameters_zero_state() {
        let m = RecurrentModel::zeros(Arch::Lstm, 2, 3, 1, None).unwrap();
        let (h, c) = lstm_step(&m, &[0.0; 3], &[0.0; 3], &[0.7, -0.2]);
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn matches_scalar_reference() {
        let m = random_model(Arch::Lstm, 2, 3, 1, 5);
        let (n, i_n) = (3, 2);
        let h0 = [0.2, -0.1, 0.4];
        let c0 = [0.5, 0.0, -0.3];
        let x = [0.9, -0.4];
        let (w_in, w_rec, b) = (m.param("w_in"), m.param("w_rec"), m.param("b"));
        let pre = |r: usize| {
            let mut z = b[r];
            for j in 0..n {
                z += w_rec[r * n + j] * h0[j];
            }
            for k in 0..i_n {
                z += w_in[r * i_n + k] * x[k];
            }
            z
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (h, c) = lstm_step(&m, &h0, &c0, &x);
        for j in 0..n {
            let (ig, fg, gg, og) = (sig(pre(j)), sig(pre(n + j)), pre(2 * n + j).tanh(), sig(pre(3 * n + j)));
            let cc = fg * c0[j] + ig * gg;
            assert!((c[j] - cc).abs() < 1e-14);
            assert!((h[j] - og * cc.tanh()).abs() < 1e-14);
        }
    }
}
