//! Central finite-difference verification of tape gradients.

use super::param::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Compares the tape gradient of `f` with central differences of step `h`
/// over every parameter entry in `store`.
///
/// Returns the largest `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
/// `f` must be deterministic and must not mutate anything outside the tape.
pub fn grad_check<F>(store: &mut ParamStore, h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward_into(loss, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    store.zero_grad();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, store)?;
        Ok(tape.value(loss).item())
    };

    let mut worst: f64 = 0.0;
    for (pi, grads) in analytic.iter().enumerate() {
        for (k, &a) in grads.iter().enumerate() {
            let id = super::ParamId(pi);
            let orig = store.value(id).data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + h;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig - h;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let denom = 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
