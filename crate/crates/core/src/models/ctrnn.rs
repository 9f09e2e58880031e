use super::kernel::{add_outer, add_transposed, affine, euler, readout};
use super::{sigmoid, PredictionSink, RecurrentModel, StepSource, Trace};
use crate::geo::NormalizedAdjacency;

/// `y + dt·(−τ⊙y + a⊙tanh(W_rec·y + W_in·x + b))` with `τ = sigmoid(tau_raw)`.
pub fn ctrnn_step(model: &RecurrentModel, y: &[f64], x: &[f64], dt: f64) -> Vec<f64> {
    let s = preactivation_tanh(model, y, x);
    euler(y, &s, &model.tau(), model.param("a"), dt)
}

fn preactivation_tanh(model: &RecurrentModel, y: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; model.hidden_size];
    affine(&mut z, model.param("w_rec"), y, model.param("w_in"), x, model.param("b"));
    z.iter_mut().for_each(|v| *v = v.tanh());
    z
}

pub(super) fn forward<S: StepSource + ?Sized>(m: &RecurrentModel, src: &S, mut sink: Option<PredictionSink<'_>>) -> Trace {
    let mut trace = Trace { states: vec![vec![0.0; m.hidden_size]], ..Default::default() };
    let (w_out, b_out) = (m.param("w_out"), m.param("b_out"));
    let tau = m.tau();
    for t in 0..src.steps() {
        let x = src.input(t).to_vec();
        let s = preactivation_tanh(m, &trace.states[t], &x);
        let y = euler(&trace.states[t], &s, &tau, m.param("a"), m.dt);
        let pred = readout(w_out, b_out, &y);
        if let Some(sink) = sink.as_mut() {
            sink(t, &pred);
        }
        trace.preds.extend_from_slice(&pred);
        trace.states.push(y);
        trace.acts.push(s);
        trace.inputs.push(x);
    }
    trace
}

/// Backpropagates through one Euler step given `g = ∂L/∂y_{t+1}`, accumulating parameter
/// gradients (with `tau` still in effective space) and returning `∂L/∂y_t`.
///
/// With a mask, the recurrent kernel is `W_rec ⊙ mask` and so is its gradient.
pub(super) fn euler_backward(
    m: &RecurrentModel,
    mask: Option<&NormalizedAdjacency>,
    y: &[f64],
    s: &[f64],
    x: &[f64],
    gnew: &[f64],
    grads: &mut [f64],
    dtau: &mut [f64],
) -> Vec<f64> {
    let l = &m.layout;
    let n = m.hidden_size;
    let (a, tau, dt) = (m.param("a"), m.tau(), m.dt);
    let w_rec = m.param("w_rec");
    let mut dz = vec![0.0; n];
    {
        let ga = &mut grads[l.range("a")];
        for i in 0..n {
            ga[i] += gnew[i] * dt * s[i];
            dtau[i] += gnew[i] * dt * -y[i];
            dz[i] = gnew[i] * dt * a[i] * (1.0 - s[i] * s[i]);
        }
    }
    let mut dy: Vec<f64> = (0..n).map(|i| gnew[i] * (1.0 - dt * tau[i])).collect();
    match mask {
        None => {
            add_outer(&mut grads[l.range("w_rec")], &dz, y);
            add_transposed(&mut dy, w_rec, &dz);
        }
        Some(mask) => {
            let off = l.range("w_rec").start;
            for i in 0..n {
                if dz[i] == 0.0 {
                    continue;
                }
                let (cols, vals) = mask.row(i);
                for (&j, &ah) in cols.iter().zip(vals) {
                    grads[off + i * n + j] += dz[i] * ah * y[j];
                    dy[j] += w_rec[i * n + j] * ah * dz[i];
                }
            }
        }
    }
    add_outer(&mut grads[l.range("w_in")], &dz, x);
    for (gb, d) in grads[l.range("b")].iter_mut().zip(&dz) {
        *gb += d;
    }
    dy
}

pub(super) fn finish_tau(m: &RecurrentModel, dtau: &[f64], grads: &mut [f64]) {
    let r = m.layout.range("tau_raw");
    for ((g, d), raw) in grads[r.clone()].iter_mut().zip(dtau).zip(&m.params[r]) {
        let t = sigmoid(*raw);
        *g += d * t * (1.0 - t);
    }
}

pub(super) fn backward(m: &RecurrentModel, trace: &Trace, dpred: &[f64]) -> Vec<f64> {
    let (n, p) = (m.hidden_size, m.output_size);
    let l = &m.layout;
    let mut g = vec![0.0; l.total()];
    let mut dtau = vec![0.0; n];
    let w_out = m.param("w_out");
    let mut dy_next = vec![0.0; n];
    for t in (0..trace.inputs.len()).rev() {
        let y_new = &trace.states[t + 1];
        let dp = &dpred[t * p..(t + 1) * p];
        add_outer(&mut g[l.range("w_out")], dp, y_new);
        for (gb, d) in g[l.range("b_out")].iter_mut().zip(dp) {
            *gb += d;
        }
        let mut gnew = dy_next;
        add_transposed(&mut gnew, w_out, dp);
        dy_next = euler_backward(m, None, &trace.states[t], &trace.acts[t], &trace.inputs[t], &gnew, &mut g, &mut dtau);
    }
    finish_tau(m, &dtau, &mut g);
    g
}
