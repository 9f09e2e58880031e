use super::{Loss, RecurrentModel, StepSource};
use crate::error::Result;

/// Denominator floor for the relative error, below which differences count as absolute.
///
/// Central differences at h = 1e-5 carry roundoff near `f64::EPSILON * |loss| / h`, about
/// 1e-10 for unit losses, so partials much smaller than 1e-6 cannot be resolved to 1e-4.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter with the largest relative error.
    pub worst: Option<String>,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `f` around `params`.
pub fn grad_check_with(
    params: &[f64],
    analytic: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
    step: f64,
    tolerance: f64,
    describe: impl Fn(usize) -> String,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len());
    let mut p = params.to_vec();
    let mut worst = (0.0, None);
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let up = f(&p);
        p[i] = orig - step;
        let down = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > worst.0 || rel.is_nan() {
            worst = (if rel.is_nan() { f64::INFINITY } else { rel }, Some(i));
        }
    }
    GradCheckReport {
        max_rel_error: worst.0,
        worst: worst.1.map(describe),
        checked: p.len(),
        tolerance,
        passed: worst.0 < tolerance,
    }
}

/// Checks the model's BPTT gradient of the mean sequence loss, step 1e-5.
pub fn grad_check<S: StepSource + ?Sized>(
    model: &RecurrentModel,
    src: &S,
    targets: &[f64],
    loss: Loss,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_grad(src, targets, loss)?;
    let mut probe = model.clone();
    Ok(grad_check_with(
        &model.params,
        &analytic,
        |p| {
            probe.params.copy_from_slice(p);
            probe.loss_only(src, targets, loss).expect("shapes already checked")
        },
        1e-5,
        tolerance,
        |i| model.layout.describe(i),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_util::{random_model, random_sequence};
    use crate::models::{Arch, Forcing, LossKind};

    #[test]
    fn every_arch_and_loss_passes() {
        for arch in Arch::ALL {
            for kind in LossKind::ALL {
                for seed in 0..3 {
                    let m = random_model(arch, 3, 6, 2, seed);
                    let (seq, tgt) = random_sequence(&m, 5, seed);
                    let r = grad_check(&m, &seq, &tgt, kind.into(), 1e-4).unwrap();
                    assert!(r.passed, "{arch:?} {kind:?} seed {seed}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn free_running_ctgrn_passes() {
        let mut m = random_model(Arch::CtGrn, 2, 7, 2, 9);
        m.forcing = Forcing::Off;
        let (seq, tgt) = random_sequence(&m, 5, 9);
        assert!(grad_check(&m, &seq, &tgt, LossKind::Mse.into(), 1e-4).unwrap().passed);
    }

    #[test]
    fn missing_mask_factor_is_caught() {
        let m = random_model(Arch::CtGrn, 2, 8, 2, 3);
        let (seq, tgt) = random_sequence(&m, 5, 3);
        let loss = LossKind::Mse.into();
        let (_, mut g) = m.loss_and_grad(&seq, &tgt, loss).unwrap();
        let adj = &m.graph.as_ref().unwrap().adjacency;
        let r = m.layout.range("w_rec");
        for i in 0..8 {
            let (cols, vals) = adj.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                g[r.start + i * 8 + j] /= a;
            }
        }
        let mut probe = m.clone();
        let rep = grad_check_with(&m.params, &g, |p| {
            probe.params.copy_from_slice(p);
            probe.loss_only(&seq, &tgt, loss).unwrap()
        }, 1e-5, 1e-4, |i| m.layout.describe(i));
        assert!(!rep.passed);
        assert!(rep.worst.unwrap().starts_with("w_rec"));
    }

    #[test]
    fn empty_parameter_vector_passes() {
        let r = grad_check_with(&[], &[], |_| 0.0, 1e-5, 1e-4, |i| i.to_string());
        assert!(r.passed);
        assert_eq!(r.checked, 0);
    }

    #[test]
    fn matching_target_gives_zero_gradient() {
        for arch in Arch::ALL {
            let m = random_model(arch, 3, 5, 2, 1);
            let (seq, _) = random_sequence(&m, 4, 1);
            let preds = m.forward(&seq, None).unwrap().preds;
            for kind in LossKind::ALL {
                let (l, g) = m.loss_and_grad(&seq, &preds, kind.into()).unwrap();
                assert_eq!(l, 0.0);
                assert!(g.iter().all(|&v| v == 0.0), "{arch:?}");
            }
        }
    }
}
