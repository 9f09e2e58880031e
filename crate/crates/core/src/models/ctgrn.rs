use super::ctrnn::{euler_backward, finish_tau};
use super::kernel::{affine_masked, euler};
use super::{Forcing, PredictionSink, RecurrentModel, StepSource, Trace};
use crate::error::{Error, Result};

/// One masked step. Returns the next state and the POI prediction (taken before forcing).
///
/// With mixed forcing, POI entries of the next state are overwritten with the observed
/// values and every other node becomes predicted + observed.
pub fn ctgrn_step(
    model: &RecurrentModel,
    y: &[f64],
    x: &[f64],
    observed: Option<&[f64]>,
    forcing: Forcing,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let graph = model.graph.as_ref().ok_or_else(|| Error::Invalid("ct-grn without graph".into()))?;
    let n = model.hidden_size;
    if y.len() != n || x.len() != model.input_size {
        return Err(Error::Shape(format!("state {} / input {} for a {n}-node graph", y.len(), x.len())));
    }
    let y_new = masked_euler(model, y, x).0;
    let pred = graph.poi_nodes.iter().map(|&k| y_new[k]).collect();
    let next = match forcing {
        Forcing::Off => y_new,
        Forcing::Mixed => {
            let obs = observed.ok_or_else(|| Error::Invalid("mixed forcing needs observations".into()))?;
            if obs.len() != n {
                return Err(Error::Shape(format!("observation width {} vs {n} nodes", obs.len())));
            }
            apply_forcing(y_new, obs, &graph.is_poi())
        }
    };
    Ok((next, pred))
}

fn masked_euler(m: &RecurrentModel, y: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let graph = m.graph.as_ref().expect("graph binding");
    let mut z = vec![0.0; m.hidden_size];
    affine_masked(&mut z, m.param("w_rec"), &graph.adjacency, y, m.param("w_in"), x, m.param("b"));
    z.iter_mut().for_each(|v| *v = v.tanh());
    let y_new = euler(y, &z, &m.tau(), m.param("a"), m.dt);
    (y_new, z)
}

fn apply_forcing(mut y: Vec<f64>, obs: &[f64], is_poi: &[bool]) -> Vec<f64> {
    for ((v, &o), &poi) in y.iter_mut().zip(obs).zip(is_poi) {
        *v = if poi { o } else { *v + o };
    }
    y
}

pub(super) fn forward<S: StepSource + ?Sized>(m: &RecurrentModel, src: &S, mut sink: Option<PredictionSink<'_>>) -> Trace {
    let graph = m.graph.as_ref().expect("graph binding");
    let is_poi = graph.is_poi();
    let mut trace = Trace { states: vec![src.observation(0).to_vec()], ..Default::default() };
    for t in 0..src.steps() {
        let x = src.input(t).to_vec();
        let (y_new, s) = masked_euler(m, &trace.states[t], &x);
        let pred: Vec<f64> = graph.poi_nodes.iter().map(|&k| y_new[k]).collect();
        if let Some(sink) = sink.as_mut() {
            sink(t, &pred);
        }
        trace.preds.extend_from_slice(&pred);
        let next = match m.forcing {
            Forcing::Off => y_new,
            Forcing::Mixed => apply_forcing(y_new, src.observation(t + 1), &is_poi),
        };
        trace.states.push(next);
        trace.acts.push(s);
        trace.inputs.push(x);
    }
    trace
}

pub(super) fn backward(m: &RecurrentModel, trace: &Trace, dpred: &[f64]) -> Vec<f64> {
    let graph = m.graph.as_ref().expect("graph binding");
    let is_poi = graph.is_poi();
    let (n, p) = (m.hidden_size, m.output_size);
    let mut g = vec![0.0; m.layout.total()];
    let mut dtau = vec![0.0; n];
    let mut dy_next = vec![0.0; n];
    for t in (0..trace.inputs.len()).rev() {
        // forced POI entries are constants: nothing flows back through them
        let mut gnew = dy_next;
        if m.forcing == Forcing::Mixed {
            for (v, &poi) in gnew.iter_mut().zip(&is_poi) {
                if poi {
                    *v = 0.0;
                }
            }
        }
        for (k, &node) in graph.poi_nodes.iter().enumerate() {
            gnew[node] += dpred[t * p + k];
        }
        dy_next = euler_backward(
            m,
            Some(&graph.adjacency),
            &trace.states[t],
            &trace.acts[t],
            &trace.inputs[t],
            &gnew,
            &mut g,
            &mut dtau,
        );
    }
    finish_tau(m, &dtau, &mut g);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{normalized_adjacency, Edge, Node, StreetGraph};
    use crate::models::test_util::random_model;
    use crate::models::{Arch, GraphBinding};
    use std::sync::Arc;

    fn path_binding() -> Arc<GraphBinding> {
        let g = StreetGraph::new(
            vec![
                Node { id: 0, lat: 0.0, lon: 0.0, poi: Some(0) },
                Node { id: 1, lat: 0.0, lon: 0.001, poi: None },
                Node { id: 2, lat: 0.0, lon: 0.002, poi: None },
            ],
            vec![Edge { u: 0, v: 1, length_m: 100.0 }, Edge { u: 1, v: 2, length_m: 50.0 }],
        )
        .unwrap();
        Arc::new(GraphBinding { adjacency: normalized_adjacency(&g), poi_nodes: vec![0], graph_hash: g.content_hash() })
    }

    #[test]
    fn unit_weights_reduce_kernel_to_adjacency() {
        let b = path_binding();
        let mut m = RecurrentModel::zeros(Arch::CtGrn, 0, 3, 1, Some(b.clone())).unwrap();
        m.param_mut("w_rec").fill(1.0);
        // with a tiny probe the pre-activation is linear in the effective kernel
        let dense = b.adjacency.to_dense();
        for j in 0..3 {
            let mut y = [0.0; 3];
            y[j] = 1.0;
            let mut z = vec![0.0; 3];
            affine_masked(&mut z, m.param("w_rec"), &b.adjacency, &y, &[], &[], m.param("b"));
            for i in 0..3 {
                assert_eq!(z[i], dense[i * 3 + j]);
            }
        }
    }

    #[test]
    fn non_neighbor_perturbation_is_invisible() {
        let b = path_binding();
        let mut m = RecurrentModel::zeros(Arch::CtGrn, 1, 3, 1, Some(b.clone())).unwrap();
        m.param_mut("w_rec").fill(0.7);
        m.param_mut("a").fill(1.0);
        m.param_mut("w_in").fill(0.2);
        assert_eq!(b.adjacency.get(0, 2), 0.0);
        let y1 = [0.3, 0.4, 0.5];
        let y2 = [0.3, 0.4, 9.5];
        let (n1, _) = ctgrn_step(&m, &y1, &[1.0], None, Forcing::Off).unwrap();
        let (n2, _) = ctgrn_step(&m, &y2, &[1.0], None, Forcing::Off).unwrap();
        assert_eq!(n1[0].to_bits(), n2[0].to_bits());
        assert_ne!(n1[1], n2[1]);
    }

    #[test]
    fn mixed_forcing_sets_poi_to_truth() {
        let m = random_model(Arch::CtGrn, 2, 8, 3, 4);
        let obs: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let y = vec![0.2; 8];
        let (free, pred) = ctgrn_step(&m, &y, &[0.1, 0.2], None, Forcing::Off).unwrap();
        let (forced, pred2) = ctgrn_step(&m, &y, &[0.1, 0.2], Some(&obs), Forcing::Mixed).unwrap();
        assert_eq!(pred, pred2);
        let g = m.graph.as_ref().unwrap();
        for k in 0..8 {
            if g.poi_nodes.contains(&k) {
                assert_eq!(forced[k], obs[k]);
            } else {
                assert_eq!(forced[k], free[k] + obs[k]);
            }
        }
    }

    #[test]
    fn mixed_without_observation_errors() {
        let m = random_model(Arch::CtGrn, 2, 8, 3, 4);
        assert!(ctgrn_step(&m, &[0.0; 8], &[0.0, 0.0], None, Forcing::Mixed).is_err());
        assert!(ctgrn_step(&m, &[0.0; 7], &[0.0, 0.0], None, Forcing::Off).is_err());
    }
}
