//! Shared dense and masked kernels. The accumulation order is fixed (recurrent terms,
//! then input terms, then bias) so that the masked and dense paths agree bitwise.

use crate::geo::NormalizedAdjacency;

/// `out[i] = Σ_j w_rec[i,j]·y[j] + Σ_k w_in[i,k]·x[k] + b[i]`.
pub(crate) fn affine(out: &mut [f64], w_rec: &[f64], y: &[f64], w_in: &[f64], x: &[f64], b: &[f64]) {
    let (n, m) = (y.len(), x.len());
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let wr = &w_rec[i * n..(i + 1) * n];
        for (w, v) in wr.iter().zip(y) {
            acc += w * v;
        }
        let wi = &w_in[i * m..(i + 1) * m];
        for (w, v) in wi.iter().zip(x) {
            acc += w * v;
        }
        *o = acc + b[i];
    }
}

/// Same as [`affine`] with the recurrent kernel replaced by `w_rec ⊙ mask`, visiting only
/// the mask's nonzeros.
pub(crate) fn affine_masked(
    out: &mut [f64],
    w_rec: &[f64],
    mask: &NormalizedAdjacency,
    y: &[f64],
    w_in: &[f64],
    x: &[f64],
    b: &[f64],
) {
    let (n, m) = (y.len(), x.len());
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let (cols, vals) = mask.row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            acc += (w_rec[i * n + j] * a) * y[j];
        }
        let wi = &w_in[i * m..(i + 1) * m];
        for (w, v) in wi.iter().zip(x) {
            acc += w * v;
        }
        *o = acc + b[i];
    }
}

/// One explicit-Euler step of `dy/dt = -τ⊙y + a⊙s`, with `s = tanh(z)` precomputed.
pub(crate) fn euler(y: &[f64], s: &[f64], tau: &[f64], a: &[f64], dt: f64) -> Vec<f64> {
    y.iter()
        .zip(s)
        .zip(tau.iter().zip(a))
        .map(|((&y, &s), (&tau, &a))| y + dt * (-tau * y + a * s))
        .collect()
}

/// `out += Wᵀ·d` for a `rows × cols` row-major matrix.
pub(crate) fn add_transposed(out: &mut [f64], w: &[f64], d: &[f64]) {
    let cols = out.len();
    for (i, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        for (o, wv) in out.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
            *o += wv * di;
        }
    }
}

/// `g += d ⊗ v` for a `d.len() × v.len()` row-major gradient block.
pub(crate) fn add_outer(g: &mut [f64], d: &[f64], v: &[f64]) {
    let cols = v.len();
    for (i, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        for (gv, &vv) in g[i * cols..(i + 1) * cols].iter_mut().zip(v) {
            *gv += di * vv;
        }
    }
}

/// `out = W·h + b`.
pub(crate) fn readout(w: &[f64], b: &[f64], h: &[f64]) -> Vec<f64> {
    let n = h.len();
    b.iter()
        .enumerate()
        .map(|(i, &bi)| {
            let mut acc = 0.0;
            for (wv, hv) in w[i * n..(i + 1) * n].iter().zip(h) {
                acc += wv * hv;
            }
            acc + bi
        })
        .collect()
}
