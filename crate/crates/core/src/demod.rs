//! Washout filter and gradient/Hessian demodulation.

use crate::error::{domain, Result};
use crate::signals::{demod_gradient_signal, demod_hessian_signal, DitherParams};

/// State of the high-pass (washout) filter `η̇ = −ω_h·η + ω_h·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub eta: f64,
    pub omega_h: f64,
}

impl FilterState {
    pub fn new(eta: f64, omega_h: f64) -> Result<Self> {
        if !(omega_h > 0.0 && omega_h.is_finite()) {
            return Err(domain(format!("filter corner frequency must be positive, got {omega_h}")));
        }
        Ok(Self { eta, omega_h })
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }
}

/// `η̇` for the current output sample.
pub fn filter_derivative(state: &FilterState, y: f64) -> f64 {
    -state.omega_h * state.eta + state.omega_h * y
}

/// `G(t) = M(t)·(y − η)`.
pub fn gradient_estimate(t: f64, y: f64, state: &FilterState, params: &DitherParams) -> Result<f64> {
    Ok(demod_gradient_signal(t, params)? * (y - state.eta))
}

/// `Ĥ(t) = N(t)·(y − η)`.
pub fn hessian_estimate(t: f64, y: f64, state: &FilterState, params: &DitherParams) -> Result<f64> {
    Ok(demod_hessian_signal(t, params)? * (y - state.eta))
}
