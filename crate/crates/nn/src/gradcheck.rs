use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::tape::{NodeId, Tape};

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub coordinates: usize,
}

/// Compares reverse-mode gradients of `loss` against central differences
/// `(f(p+eps) - f(p-eps)) / 2eps` on every scalar of `store`.
///
/// The relative error of a coordinate is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
/// Gradients already held in `store` are cleared.
pub fn grad_check<L>(store: &mut ParamStore<f64>, eps: f64, mut loss: L) -> Result<GradCheckReport>
where
    L: FnMut(&mut Tape<f64>, &ParamStore<f64>) -> Result<NodeId>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(NnError::DegenerateStep);
    }
    store.zero_grads();
    {
        let mut tape = Tape::new();
        let root = loss(&mut tape, store)?;
        tape.backward_into(root, store)?;
    }
    let mut eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let root = loss(&mut tape, store)?;
        Ok(tape.scalar(root))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        coordinates: 0,
    };
    for p in 0..store.len() {
        for i in 0..store.params()[p].value.len() {
            let original = store.params()[p].value.data()[i];
            store.params_mut()[p].value.data_mut()[i] = original + eps;
            let plus = eval(store)?;
            store.params_mut()[p].value.data_mut()[i] = original - eps;
            let minus = eval(store)?;
            store.params_mut()[p].value.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = store.params()[p].grad.data()[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            report.coordinates += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = store.params()[p].name.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic_loss_is_exact_to_roundoff() {
        let mut store = ParamStore::new();
        let w = store
            .add("w", Tensor::new(&[1, 3], vec![0.3, -1.2, 2.0]).unwrap())
            .unwrap();
        let report = grad_check(&mut store, 1e-5, |tape, store| {
            let x = tape.param(store, w);
            let sq = tape.mul(x, x)?;
            tape.sum(sq)
        })
        .unwrap();
        assert!(report.max_rel_error <= 1e-9, "{report:?}");
        assert_eq!(report.coordinates, 3);
    }

    #[test]
    fn zero_step_is_degenerate() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::scalar(1.0)).unwrap();
        let err = grad_check(&mut store, 0.0, |tape, store| Ok(tape.param(store, store.require("w")?)));
        assert_eq!(err, Err(NnError::DegenerateStep));
    }
}
