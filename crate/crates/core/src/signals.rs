//! Dither (perturbation) and demodulation signals.
//!
//! Every signal is a pure function of time. Exponentially growing
//! demodulation gains go through [`checked_exp`], so running past the
//! representable horizon is an error instead of a silent `inf`.

use crate::error::{domain, Error, Result};

/// Largest exponent accepted by [`checked_exp`].
pub const MAX_EXPONENT: f64 = 700.0;

pub fn checked_exp(x: f64) -> Result<f64> {
    if x > MAX_EXPONENT || x.is_nan() {
        return Err(Error::HorizonOverflow { exponent: x, limit: MAX_EXPONENT });
    }
    Ok(x.exp())
}

/// Amplitude, frequency and decay of the probing signal.
///
/// `d` is the input delay for the delay loop and the length of the diffusion
/// domain for the diffusion loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DitherParams {
    pub a: f64,
    pub omega: f64,
    pub lambda: f64,
    pub d: f64,
}

impl DitherParams {
    pub fn new(a: f64, omega: f64, lambda: f64, d: f64) -> Result<Self> {
        let p = Self { a, omega, lambda, d };
        p.validate()?;
        Ok(p)
    }

    /// `λ = 0` is accepted so that the classical constant-amplitude seeker can
    /// be run as a baseline.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.omega, self.lambda, self.d].iter().all(|v| v.is_finite());
        if !finite {
            return Err(domain("dither parameters must be finite"));
        }
        if self.a == 0.0 {
            return Err(domain("dither amplitude must be non-zero"));
        }
        if !(self.omega > 0.0) {
            return Err(domain(format!("dither frequency must be positive, got {}", self.omega)));
        }
        if self.lambda < 0.0 {
            return Err(domain(format!("decay rate must be non-negative, got {}", self.lambda)));
        }
        if self.d < 0.0 {
            return Err(domain(format!("delay/domain length must be non-negative, got {}", self.d)));
        }
        Ok(())
    }

    /// Dither period `2π/ω`.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }
}

/// `e^(−λt)·a·sin(ωt)`: the decaying dither as seen at the map input.
pub fn decaying_dither(t: f64, params: &DitherParams) -> f64 {
    (-params.lambda * t).exp() * params.a * (params.omega * t).sin()
}

/// `S(t + D) = e^(−λ(t+D))·a·sin(ω(t+D))`, the additive dither of the delay loop.
pub fn additive_dither_delay(t: f64, params: &DitherParams) -> f64 {
    decaying_dither(t + params.d, params)
}

/// `M(t) = (2/a)·e^(λt)·sin(ωt)`.
pub fn demod_gradient_signal(t: f64, params: &DitherParams) -> Result<f64> {
    Ok(2.0 / params.a * checked_exp(params.lambda * t)? * (params.omega * t).sin())
}

/// `N(t) = −(8/a²)·e^(2λt)·cos(2ωt)`.
pub fn demod_hessian_signal(t: f64, params: &DitherParams) -> Result<f64> {
    let a2 = params.a * params.a;
    Ok(-8.0 / a2 * checked_exp(2.0 * params.lambda * t)? * (2.0 * params.omega * t).cos())
}

/// Real and imaginary parts of `√(−λ + jω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PqConstants {
    pub p: f64,
    pub q: f64,
}

/// `p = √((√(λ²+ω²) − λ)/2)`, `q = √((√(λ²+ω²) + λ)/2)`.
///
/// `p` is recovered as `ω/(2q)` to avoid cancellation when `λ ≫ ω`.
pub fn pq_constants(lambda: f64, omega: f64) -> Result<PqConstants> {
    if !(omega > 0.0) {
        return Err(domain(format!("pq constants need ω > 0, got {omega}")));
    }
    if !(lambda >= 0.0) {
        return Err(domain(format!("pq constants need λ ≥ 0, got {lambda}")));
    }
    let r = lambda.hypot(omega);
    let q = (0.5 * (r + lambda)).sqrt();
    let p = omega / (2.0 * q);
    Ok(PqConstants { p, q })
}

/// Closed-form motion plan for the Neumann-actuated heat equation.
///
/// `β(x,t)` solves `∂_t β = ∂_xx β` with `β(0,t) = 0` and
/// `∂_x β(0,t) = e^(−λt)·a·sin(ωt)`; the flux `∂_x β(D,t)` is the dither
/// that must be injected at the far boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPlan {
    params: DitherParams,
    pq: PqConstants,
}

impl MotionPlan {
    pub fn new(params: &DitherParams) -> Result<Self> {
        Ok(Self { params: *params, pq: pq_constants(params.lambda, params.omega)? })
    }

    pub fn pq(&self) -> PqConstants {
        self.pq
    }

    /// `β(x,t)` for any real `x` (the closed form is entire in `x`).
    pub fn beta(&self, x: f64, t: f64) -> f64 {
        let PqConstants { p, q } = self.pq;
        let DitherParams { a, omega, lambda, .. } = self.params;
        let plus = omega * t + q * x;
        let minus = omega * t - q * x;
        let lead = (p * plus.sin() - q * plus.cos()) * (p * x - lambda * t).exp();
        let trail = (p * minus.sin() - q * minus.cos()) * (-p * x - lambda * t).exp();
        (lead - trail) * a / (2.0 * (p * p + q * q))
    }

    /// `∂_t β(x,t)`, equal to `∂_xx β`. A plant started from `α(x,0) = ∂_t β(x,0)`
    /// follows the plan exactly.
    pub fn beta_t(&self, x: f64, t: f64) -> f64 {
        let PqConstants { p, q } = self.pq;
        let DitherParams { a, omega, lambda, .. } = self.params;
        let plus = omega * t + q * x;
        let minus = omega * t - q * x;
        let shape = |arg: f64| {
            omega * (p * arg.cos() + q * arg.sin()) - lambda * (p * arg.sin() - q * arg.cos())
        };
        let lead = shape(plus) * (p * x - lambda * t).exp();
        let trail = shape(minus) * (-p * x - lambda * t).exp();
        (lead - trail) * a / (2.0 * (p * p + q * q))
    }

    /// `∂_x β(x,t) = (a/2)·e^(−λt)·(sin(ωt+qx)·e^(px) + sin(ωt−qx)·e^(−px))`.
    pub fn beta_x(&self, x: f64, t: f64) -> f64 {
        let PqConstants { p, q } = self.pq;
        let DitherParams { a, omega, lambda, .. } = self.params;
        0.5 * a
            * (-lambda * t).exp()
            * ((omega * t + q * x).sin() * (p * x).exp() + (omega * t - q * x).sin() * (-p * x).exp())
    }

    /// Time derivative of `∂_x β(x,t)`.
    pub fn beta_xt(&self, x: f64, t: f64) -> f64 {
        let PqConstants { p, q } = self.pq;
        let DitherParams { a, omega, lambda, .. } = self.params;
        let plus = omega * t + q * x;
        let minus = omega * t - q * x;
        0.5 * a
            * (-lambda * t).exp()
            * ((-lambda * plus.sin() + omega * plus.cos()) * (p * x).exp()
                + (-lambda * minus.sin() + omega * minus.cos()) * (-p * x).exp())
    }

    /// The dither `S(t) = ∂_x β(D,t)`.
    pub fn dither(&self, t: f64) -> f64 {
        self.beta_x(self.params.d, t)
    }

    /// `Ṡ(t)`, in closed form.
    pub fn dither_rate(&self, t: f64) -> f64 {
        self.beta_xt(self.params.d, t)
    }
}

/// `S(t) = (a/2)·e^(−λt)·(sin(ωt+qD)·e^(pD) + sin(ωt−qD)·e^(−pD))`.
pub fn diffusion_dither(t: f64, params: &DitherParams) -> f64 {
    plan(params).dither(t)
}

/// Closed-form `dS/dt` of [`diffusion_dither`].
pub fn diffusion_dither_rate(t: f64, params: &DitherParams) -> f64 {
    plan(params).dither_rate(t)
}

/// `β(x,t)` restricted to the physical domain `0 ≤ x ≤ D`.
pub fn motion_planning_beta(x: f64, t: f64, params: &DitherParams) -> Result<f64> {
    if !(0.0..=params.d).contains(&x) {
        return Err(domain(format!("x = {x} outside [0, {}]", params.d)));
    }
    Ok(plan(params).beta(x, t))
}

fn plan(params: &DitherParams) -> MotionPlan {
    let pq = pq_constants(params.lambda, params.omega).unwrap_or(PqConstants { p: f64::NAN, q: f64::NAN });
    MotionPlan { params: *params, pq }
}
