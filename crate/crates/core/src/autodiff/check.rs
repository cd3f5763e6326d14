use alloc::format;
use alloc::string::{String, ToString};

use super::params::{Gradients, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// One parameter entry compared by [`compare_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Entry attaining `max_rel_error`; `None` when the store is empty.
    pub worst: Option<GradEntry>,
    pub checked: usize,
    pub pass: bool,
}

fn eval_scalar<F>(store: &ParamStore, graph: &F) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var>,
{
    let (out, tape) = Tape::record(store, |t| graph(t))?;
    if let Some((i, op)) = tape.first_non_finite() {
        return Err(Error::NonFinite { location: format!("node #{i} ({op})") });
    }
    let (r, c) = tape.shape(out);
    if (r, c) != (1, 1) {
        return Err(Error::NotScalar { node: out.index(), rows: r, cols: c });
    }
    Ok(tape.scalar_value(out))
}

/// Runs `graph` forward and backward, then checks every adjoint against
/// central finite differences.
pub fn grad_check<F>(store: &ParamStore, graph: F, fd_step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var>,
{
    let (out, tape) = Tape::record(store, |t| graph(t))?;
    if let Some((i, op)) = tape.first_non_finite() {
        return Err(Error::NonFinite { location: format!("node #{i} ({op})") });
    }
    let analytic = tape.backward(out)?;
    compare_gradients(store, &analytic, graph, fd_step, tolerance)
}

/// Compares given adjoints against central differences of `graph`.
///
/// Relative error per entry is `|a - n| / max(|a|, |n|, noise / tolerance)`
/// where `noise = 4 * eps * max(1, |L|) / fd_step` bounds the rounding in a
/// central difference of the scalar `L`. A discrepancy within that noise
/// therefore never fails the check on its own.
pub fn compare_gradients<F>(
    store: &ParamStore,
    analytic: &Gradients,
    graph: F,
    fd_step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var>,
{
    if !(fd_step > 0.0) || !(tolerance > 0.0) {
        return Err(Error::Contract("fd_step and tolerance must be positive".to_string()));
    }
    let noise = 4.0 * f64::EPSILON * eval_scalar(store, &graph)?.abs().max(1.0) / fd_step;
    let floor = noise / tolerance;
    let mut probe = store.clone();
    let mut worst: Option<GradEntry> = None;
    for flat in 0..store.num_values() {
        let base = store.as_flat()[flat];
        let (hi, lo) = (base + fd_step, base - fd_step);
        probe.as_flat_mut()[flat] = hi;
        let plus = eval_scalar(&probe, &graph)?;
        probe.as_flat_mut()[flat] = lo;
        let minus = eval_scalar(&probe, &graph)?;
        probe.as_flat_mut()[flat] = base;

        // divide by the step actually realized in floating point
        let numeric = (plus - minus) / (hi - lo);
        let a = analytic.as_flat()[flat];
        let (id, index) = store.locate(flat).expect("flat index in range");
        if !a.is_finite() || !numeric.is_finite() {
            return Err(Error::NonFinite { location: format!("gradient of `{}`[{index}]", store.name(id)) });
        }
        let rel_error = libm::fabs(a - numeric) / libm::fabs(a).max(libm::fabs(numeric)).max(floor);
        if worst.as_ref().is_none_or(|w| rel_error > w.rel_error) {
            worst = Some(GradEntry { param: store.name(id).to_string(), index, analytic: a, numeric, rel_error });
        }
    }
    let max_rel_error = worst.as_ref().map_or(0.0, |w| w.rel_error);
    Ok(GradCheckReport { max_rel_error, worst, checked: store.num_values(), pass: max_rel_error < tolerance })
}
