//! Static input/output maps seen by the extremum seeker.

use crate::engine::HistoryBuffer;
use crate::error::{domain, Result};

/// A scalar static map `y = Q(θ)`.
pub trait StaticMap {
    fn eval(&self, theta: f64) -> f64;
}

/// `Q(θ) = y* + (H/2)(θ − θ*)²` with `H > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticMap {
    pub y_star: f64,
    pub theta_star: f64,
    pub hessian: f64,
}

impl QuadraticMap {
    pub fn new(y_star: f64, theta_star: f64, hessian: f64) -> Result<Self> {
        let map = Self { y_star, theta_star, hessian };
        map.validate()?;
        Ok(map)
    }

    /// `Q(θ) = 1 + (θ − 2)²`, the benchmark map used throughout the tests.
    pub fn benchmark() -> Self {
        Self { y_star: 1.0, theta_star: 2.0, hessian: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y_star.is_finite() && self.theta_star.is_finite()) {
            return Err(domain("map optimum must be finite"));
        }
        if !(self.hessian > 0.0 && self.hessian.is_finite()) {
            return Err(domain(format!("map Hessian must be positive, got {}", self.hessian)));
        }
        Ok(())
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let e = theta - self.theta_star;
        self.y_star + 0.5 * self.hessian * e * e
    }

    pub fn gradient(&self, theta: f64) -> f64 {
        self.hessian * (theta - self.theta_star)
    }

    /// `Q(θ(t − delay))` looked up from a recorded input history.
    ///
    /// The history is held at its first sample for times before the record
    /// starts.
    pub fn eval_delayed(&self, history: &HistoryBuffer, t: f64, delay: f64) -> Result<f64> {
        if !(delay >= 0.0) {
            return Err(domain(format!("delay must be non-negative, got {delay}")));
        }
        Ok(self.eval(history.delayed_value(t - delay)?))
    }
}

impl StaticMap for QuadraticMap {
    fn eval(&self, theta: f64) -> f64 {
        QuadraticMap::eval(self, theta)
    }
}

/// Adapter turning any closure into a [`StaticMap`], for exploring
/// non-quadratic objectives.
pub struct FnMap<F>(pub F);

impl<F: Fn(f64) -> f64> StaticMap for FnMap<F> {
    fn eval(&self, theta: f64) -> f64 {
        (self.0)(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn ramp_history(until: f64, dt: f64) -> HistoryBuffer {
        let n = (until / dt).round() as usize + 1;
        let mut h = HistoryBuffer::new(n);
        for i in 0..n {
            let s = i as f64 * dt;
            h.push(s, s).unwrap();
        }
        h
    }

    #[test]
    fn benchmark_values() {
        let q = QuadraticMap::benchmark();
        assert_eq!(q.eval(2.0), 1.0);
        assert_eq!(q.eval(3.0), 2.0);
        assert_eq!(q.eval(0.0), 5.0);
    }

    #[test]
    fn rejects_non_positive_hessian() {
        assert!(matches!(QuadraticMap::new(1.0, 2.0, 0.0), Err(Error::Domain(_))));
        assert!(QuadraticMap::new(1.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn delayed_evaluation() {
        let q = QuadraticMap::benchmark();
        let h = ramp_history(10.0, 0.5);
        assert_eq!(q.eval_delayed(&h, 7.0, 5.0).unwrap(), 1.0);
        assert_eq!(q.eval_delayed(&h, 10.0, 5.0).unwrap(), 10.0);
        // before the record starts the input is held at θ(0) = 0
        assert_eq!(q.eval_delayed(&h, 2.0, 5.0).unwrap(), 5.0);
    }

    #[test]
    fn constant_history_at_optimum() {
        let q = QuadraticMap::benchmark();
        let mut h = HistoryBuffer::new(16);
        for i in 0..16 {
            h.push(i as f64, 2.0).unwrap();
        }
        for t in [0.0, 3.3, 9.0, 15.0] {
            assert_eq!(q.eval_delayed(&h, t, 5.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn zero_delay_matches_direct_evaluation() {
        let q = QuadraticMap::benchmark();
        let h = ramp_history(4.0, 0.25);
        for t in [0.0, 0.25, 1.5, 4.0] {
            assert_eq!(q.eval_delayed(&h, t, 0.0).unwrap(), q.eval(t));
        }
    }

    #[test]
    fn closure_maps() {
        let m = FnMap(|x: f64| x.cos());
        assert_eq!(m.eval(0.0), 1.0);
    }

    proptest! {
        #[test]
        fn symmetric_about_optimum(delta in -50.0f64..50.0, ts in -10.0f64..10.0, h in 0.1f64..10.0) {
            let q = QuadraticMap::new(0.5, ts, h).unwrap();
            let (up, down) = (q.eval(ts + delta), q.eval(ts - delta));
            prop_assert!((up - down).abs() <= 1e-12 * up.abs());
            prop_assert!(q.eval(ts + delta) >= q.y_star);
        }

        #[test]
        fn central_difference_is_exact_gradient(theta in -20.0f64..20.0, step in 1e-3f64..1.0) {
            let q = QuadraticMap::benchmark();
            let fd = (q.eval(theta + step) - q.eval(theta - step)) / (2.0 * step);
            let g = q.gradient(theta);
            prop_assert!((fd - g).abs() <= 1e-9 * (1.0 + g.abs()) / step);
        }
    }
}
