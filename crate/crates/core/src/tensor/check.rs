use crate::error::{Error, Result};

use super::{Binder, GradBuffer, ParamStore, Tape, Tensor, Var};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// max over coordinates of `|analytic - numeric| / max(1, |analytic|)`
    pub max_relative_error: f64,
    pub coordinates: usize,
    /// (parameter name, flat index, analytic, numeric) at the worst coordinate
    pub worst: Option<(String, usize, f64, f64)>,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Checks the gradient of a scalar function of one tensor.
///
/// `f` must be deterministic: any noise it uses has to be frozen.
pub fn finite_difference_check<F>(f: F, x: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut store = ParamStore::new();
    let id = store.add("x", x.clone());
    let report = check_store_gradients(
        &store,
        |tape, binder| {
            let v = binder.var(tape, id);
            f(tape, v)
        },
        step,
    )?;
    Ok(report.max_relative_error)
}

/// Checks gradients of a scalar loss with respect to every trainable
/// parameter of `store`.
pub fn check_store_gradients<F>(store: &ParamStore, f: F, step: f64) -> Result<GradientCheck>
where
    F: Fn(&mut Tape, &mut Binder<'_>) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let mut binder = Binder::new(store);
        let loss = f(&mut tape, &mut binder)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "finite_difference_check" });
        }
        Ok(value)
    };

    let mut tape = Tape::new();
    let mut binder = Binder::new(store);
    let loss = f(&mut tape, &mut binder)?;
    let grads = tape.backward(loss)?;
    let mut analytic = GradBuffer::zeros_like(store);
    binder.accumulate(&grads, &mut analytic);

    let mut work = store.clone();
    let mut report = GradientCheck {
        max_relative_error: 0.0,
        coordinates: 0,
        worst: None,
    };
    for id in store.ids().filter(|&id| store.is_trainable(id)) {
        for k in 0..store.get(id).len() {
            let original = store.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = original + step;
            let plus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = original - step;
            let minus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(id)[k];
            let err = relative_error(a, numeric);
            report.coordinates += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((store.name(id).to_string(), k, a, numeric));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let x = Tensor::vector(vec![3.0]).unwrap();
        let err = finite_difference_check(|t, v| t.mul(v, v), &x, 1e-5).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn abs_away_from_zero() {
        let x = Tensor::vector(vec![1.0]).unwrap();
        let err = finite_difference_check(|t, v| t.abs(v), &x, 1e-5).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn rejects_nonpositive_step() {
        let x = Tensor::vector(vec![1.0]).unwrap();
        assert!(finite_difference_check(|t, v| t.abs(v), &x, 0.0).is_err());
    }

    #[test]
    fn non_finite_intermediate_is_an_error() {
        // log(x - 1) at x = 1 + step/2: the minus-side evaluation hits log of a
        // negative number.
        let x = Tensor::vector(vec![1.0 + 5e-6]).unwrap();
        let res = finite_difference_check(
            |t, v| {
                let one = t.constant_vec(vec![1.0])?;
                let d = t.sub(v, one)?;
                t.log(d)
            },
            &x,
            1e-5,
        );
        assert!(res.is_err());
    }
}
