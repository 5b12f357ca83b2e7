use super::error::DiffError;
use super::param::ParamStore;
use super::tape::{Tape, Var};
use crate::scalar::{lit, to_f64, Real};

/// Worst coordinate found by [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub param: String,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

/// Compares tape gradients with central differences.
///
/// At most `max_coords_per_param` evenly strided coordinates are probed per
/// parameter. The error for one coordinate is
/// `|analytic - numeric| / max(1e-8, |numeric|)`.
pub fn grad_check<T, F>(
    store: &mut ParamStore<T>,
    eps: f64,
    max_coords_per_param: usize,
    loss: F,
) -> Result<GradCheckReport, DiffError>
where
    T: Real,
    F: for<'a> Fn(&mut Tape<'a, T>) -> Result<Var, DiffError>,
{
    let analytic = {
        let mut tape = Tape::new(store);
        let out = loss(&mut tape)?;
        tape.backward(out)?
    };
    let eval = |store: &ParamStore<T>| -> Result<f64, DiffError> {
        let mut tape = Tape::new(store);
        let out = loss(&mut tape)?;
        Ok(to_f64(tape.scalar(out)))
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        param: String::new(),
        index: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        coords_checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let (rows, cols) = store.get(id).shape();
        let len = rows * cols;
        if len == 0 {
            continue;
        }
        let stride = len.div_ceil(max_coords_per_param.max(1)).max(1);
        for flat in (0..len).step_by(stride) {
            let idx = (flat / cols, flat % cols);
            let original = store.get(id).value[idx];
            store.get_mut(id).value[idx] = original + lit(eps);
            let plus = eval(store)?;
            store.get_mut(id).value[idx] = original - lit(eps);
            let minus = eval(store)?;
            store.get_mut(id).value[idx] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id).map_or(0.0, |g| to_f64(g[idx]));
            let err = (a - numeric).abs() / numeric.abs().max(1e-8);
            report.coords_checked += 1;
            if err > report.max_relative_error || report.param.is_empty() {
                report.max_relative_error = err;
                report.param = store.get(id).name.clone();
                report.index = idx;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn quadratic_is_exact() {
        let mut s = ParamStore::new();
        let x = s.add("x", array![[0.3f64, -1.2, 2.0]]);
        let r = grad_check(&mut s, 1e-4, 10, |t| {
            let v = t.param(x);
            let sq = t.square(v);
            Ok(t.sum(sq))
        })
        .unwrap();
        assert!(r.max_relative_error < 1e-7, "{r:?}");
        assert_eq!(r.coords_checked, 3);
    }
}
