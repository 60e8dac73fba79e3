use crate::error::{Error, Result};

/// Advances `state` from `t` to `t + dt` with the classical four-stage
/// Runge–Kutta scheme.
///
/// The right-hand side is fallible so that stage evaluations can surface
/// history or overflow errors; any non-finite stage derivative is reported
/// as [`Error::NumericalBlowup`].
pub fn rk4_step<const N: usize, F>(state: [f64; N], t: f64, dt: f64, mut rhs: F) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    if !(dt > 0.0) {
        return Err(crate::error::domain(format!("rk4 step size must be positive, got {dt}")));
    }
    let mut eval = |tau: f64, x: &[f64; N]| -> Result<[f64; N]> {
        let d = rhs(tau, x)?;
        if let Some(i) = d.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup {
                t: tau,
                detail: format!("derivative component {i} is {} (state {:?})", d[i], x),
            });
        }
        Ok(d)
    };
    let axpy = |x: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] {
        let mut out = *x;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += s * ki;
        }
        out
    };

    let half = 0.5 * dt;
    let k1 = eval(t, &state)?;
    let k2 = eval(t + half, &axpy(&state, &k1, half))?;
    let k3 = eval(t + half, &axpy(&state, &k2, half))?;
    let k4 = eval(t + dt, &axpy(&state, &k3, dt))?;

    let mut next = state;
    for i in 0..N {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(next)
}
