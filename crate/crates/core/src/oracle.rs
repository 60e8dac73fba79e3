//! Closed-form solutions of the averaged error systems, plus trajectory
//! analysis used to check the simulated loops against them.
//!
//! Everything here is independent of the loop integrators: the averaged
//! systems are integrated with their own RK4 calls and the reaction–diffusion
//! solution is a separated-variables series.

use std::f64::consts::PI;

use crate::engine::{rk4_step, Field, HistoryBuffer, Trajectory};
use crate::error::{domain, Error, Result};

/// Parameters entering the averaged systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedParams {
    pub k: f64,
    pub hessian: f64,
    pub lambda: f64,
    pub omega_h: f64,
    pub a: f64,
    /// Delay (delay loop) or domain length (diffusion loop).
    pub d: f64,
}

impl AveragedParams {
    /// Contraction rate `kH − λ` of the averaged estimate error.
    pub fn contraction_rate(&self) -> f64 {
        self.k * self.hessian - self.lambda
    }
}

/// `θ̃_f^av(t) = θ0·e^(−(kH−λ)t)`.
pub fn averaged_theta_delay(t: f64, theta0: f64, k: f64, hessian: f64, lambda: f64) -> f64 {
    theta0 * (-(k * hessian - lambda) * t).exp()
}

/// Transport-line profile `ū_f^av(x,t) = θ0·e^(−(kH−λ)(t+x−D))` on `0 ≤ x ≤ D`.
pub fn averaged_transport_profile(x: f64, t: f64, theta0: f64, k: f64, hessian: f64, lambda: f64, d: f64) -> Result<f64> {
    if !(0.0..=d).contains(&x) {
        return Err(domain(format!("x = {x} outside [0, {d}]")));
    }
    Ok(theta0 * (-(k * hessian - lambda) * (t + x - d)).exp())
}

/// Limit of the averaged, re-weighted filter state: `ω_h·H·a² / (4(ω_h − 2λ))`.
pub fn eta_av_limit(omega_h: f64, hessian: f64, a: f64, lambda: f64) -> Result<f64> {
    if !(omega_h > 2.0 * lambda) {
        return Err(domain(format!("filter condition violated: ω_h = {omega_h} ≤ 2λ = {}", 2.0 * lambda)));
    }
    Ok(omega_h * hessian * a * a / (4.0 * (omega_h - 2.0 * lambda)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedDelayState {
    pub theta_f_av: f64,
    pub eta_f_av: f64,
    pub t: f64,
}

/// Right-hand side of the averaged delay system:
/// `θ' = −(kH−λ)θ`, `η' = −(ω_h−2λ)η + ω_h(H/2)(e^(2λD)·θ(t−D)² + a²/2)`.
pub fn averaged_delay_rhs(state: &AveragedDelayState, delayed_theta_f_av: f64, p: &AveragedParams) -> (f64, f64) {
    let theta_dot = -p.contraction_rate() * state.theta_f_av;
    let forcing = (2.0 * p.lambda * p.d).exp() * delayed_theta_f_av * delayed_theta_f_av + 0.5 * p.a * p.a;
    let eta_dot = -(p.omega_h - 2.0 * p.lambda) * state.eta_f_av + p.omega_h * 0.5 * p.hessian * forcing;
    (theta_dot, eta_dot)
}

/// Integrates the averaged delay system with RK4 from `θ̃_f^av(0) = theta0`.
///
/// Before `t = D` the delayed argument comes from the closed-form transport
/// profile; afterwards from the integrated history.
pub fn integrate_averaged_delay(
    p: &AveragedParams,
    theta0: f64,
    eta0: f64,
    dt: f64,
    horizon: f64,
) -> Result<Vec<AveragedDelayState>> {
    if p.d > 0.0 && dt > p.d {
        return Err(domain("step must not exceed the delay"));
    }
    let steps = (horizon / dt).round() as usize;
    let mut history = HistoryBuffer::for_delay(p.d, dt);
    history.push(0.0, theta0)?;
    let delayed = |history: &HistoryBuffer, tau: f64, current: f64| -> Result<f64> {
        let s = tau - p.d;
        if p.d == 0.0 {
            Ok(current)
        } else if s < 0.0 {
            averaged_transport_profile((p.d + s).max(0.0), 0.0, theta0, p.k, p.hessian, p.lambda, p.d)
        } else {
            history.delayed_value(s)
        }
    };

    let mut out = Vec::with_capacity(steps + 1);
    let mut x = [theta0, eta0];
    out.push(AveragedDelayState { theta_f_av: x[0], eta_f_av: x[1], t: 0.0 });
    for n in 0..steps {
        let t = n as f64 * dt;
        x = rk4_step(x, t, dt, |tau, s| {
            let state = AveragedDelayState { theta_f_av: s[0], eta_f_av: s[1], t: tau };
            let (a, b) = averaged_delay_rhs(&state, delayed(&history, tau, s[0])?, p);
            Ok([a, b])
        })?;
        let t_next = (n + 1) as f64 * dt;
        history.push(t_next, x[0])?;
        out.push(AveragedDelayState { theta_f_av: x[0], eta_f_av: x[1], t: t_next });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedDiffusionState {
    /// `Θ̃_f^av`
    pub estimate_f_av: f64,
    pub eta_f_av: f64,
    pub t: f64,
}

/// Right-hand side of the averaged diffusion system, with the PDE trace
/// `θ̃_f^av(t) = ∂_x ū_f^av(0,t)` supplied by the caller.
pub fn averaged_diffusion_rhs(state: &AveragedDiffusionState, trace_theta_f_av: f64, p: &AveragedParams) -> (f64, f64) {
    let estimate_dot = -p.contraction_rate() * state.estimate_f_av;
    let forcing = trace_theta_f_av * trace_theta_f_av + 0.5 * p.a * p.a;
    let eta_dot = -(p.omega_h - 2.0 * p.lambda) * state.eta_f_av + p.omega_h * 0.5 * p.hessian * forcing;
    (estimate_dot, eta_dot)
}

/// Number of series modes kept in [`ReactionDiffusionExact`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesTruncation {
    n_modes: usize,
}

impl SeriesTruncation {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(domain("series truncation needs at least one mode"));
        }
        Ok(Self { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self { n_modes: 50 }
    }
}

/// Separated-variables solution of the averaged reaction–diffusion problem
///
/// ```text
/// ∂_t u = ∂_xx u + λu,  u(0,t) = 0,  ∂_x u(D,t) = Θ0·e^(−(kH−λ)t),  u(x,0) = u0(x)
/// ```
///
/// as a particular part `Θ0·sin(√(kH)x)/(√(kH)·cos(√(kH)D))·e^(−(kH−λ)t)` plus
/// quarter-wave modes `sin(μ_n x)·e^((λ−μ_n²)t)`, `μ_n = (2n−1)π/(2D)`.
///
/// The mode coefficients integrate over `[0, 2D]` with weight `1/D`, with the
/// profile extended evenly about `x = D`. The projected profile is the initial
/// data minus the particular part at `t = 0`, so the series reproduces `u0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionDiffusionExact {
    theta0: f64,
    root_kh: f64,
    decay: f64,
    lambda: f64,
    d: f64,
    coefficients: Vec<f64>,
}

/// Smallest `|cos(√(kH)D)|` accepted before the particular part is treated as resonant.
pub const RESONANCE_TOLERANCE: f64 = 1e-10;

impl ReactionDiffusionExact {
    pub fn new(
        theta0: f64,
        k: f64,
        hessian: f64,
        lambda: f64,
        d: f64,
        initial_profile: impl Fn(f64) -> f64,
        trunc: SeriesTruncation,
    ) -> Result<Self> {
        let kh = k * hessian;
        if !(kh > 0.0) {
            return Err(domain(format!("kH must be positive, got {kh}")));
        }
        if !(d > 0.0) {
            return Err(domain(format!("domain length must be positive, got {d}")));
        }
        let root_kh = kh.sqrt();
        if (root_kh * d).cos().abs() < RESONANCE_TOLERANCE {
            return Err(domain(format!("resonance: cos(√(kH)·D) = 0 for √(kH)·D = {}", root_kh * d)));
        }
        let mut this = Self { theta0, root_kh, decay: kh - lambda, lambda, d, coefficients: Vec::new() };
        let deviation = |x: f64| initial_profile(x) - this.particular(x, 0.0);
        this.coefficients = mode_coefficients(deviation, d, trunc.n_modes());
        Ok(this)
    }

    fn mode_wavenumber(&self, n: usize) -> f64 {
        PI * (2 * n - 1) as f64 / (2.0 * self.d)
    }

    /// Growth exponent `λ − μ_n²` of mode `n` (1-based).
    pub fn mode_exponent(&self, n: usize) -> f64 {
        let mu = self.mode_wavenumber(n);
        self.lambda - mu * mu
    }

    /// Modes whose exponent is non-negative (none when `λ < π²/(4D²)`).
    pub fn non_decaying_modes(&self) -> usize {
        (1..=self.coefficients.len()).filter(|&n| self.mode_exponent(n) >= 0.0).count()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// The particular (boundary-driven) part of the solution.
    pub fn particular(&self, x: f64, t: f64) -> f64 {
        let r = self.root_kh;
        self.theta0 / (r * (r * self.d).cos()) * (r * x).sin() * (-self.decay * t).exp()
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        if !(0.0..=self.d).contains(&x) {
            return Err(domain(format!("x = {x} outside [0, {}]", self.d)));
        }
        let modes: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let n = i + 1;
                (self.mode_exponent(n) * t).exp() * (self.mode_wavenumber(n) * x).sin() * m
            })
            .sum();
        Ok(self.particular(x, t) + modes)
    }

    /// `∂_x u(0,t)`, the averaged trace `θ̃_f^av(t)`.
    pub fn boundary_flux(&self, t: f64) -> f64 {
        let r = self.root_kh;
        let lead = self.theta0 / (r * self.d).cos() * (-self.decay * t).exp();
        let modes: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let n = i + 1;
                self.mode_wavenumber(n) * m * (self.mode_exponent(n) * t).exp()
            })
            .sum();
        lead + modes
    }
}

/// Convenience wrapper evaluating [`ReactionDiffusionExact`] at one point.
#[allow(clippy::too_many_arguments)]
pub fn reaction_diffusion_exact(
    x: f64,
    t: f64,
    theta0: f64,
    k: f64,
    hessian: f64,
    lambda: f64,
    d: f64,
    initial_profile: impl Fn(f64) -> f64,
    trunc: SeriesTruncation,
) -> Result<f64> {
    ReactionDiffusionExact::new(theta0, k, hessian, lambda, d, initial_profile, trunc)?.eval(x, t)
}

/// `M_n = (1/D)·∫_0^{2D} f(x)·sin(μ_n x) dx` with `f(2D − x) := f(x)`,
/// by composite Simpson on a grid fine enough for the highest mode.
fn mode_coefficients(f: impl Fn(f64) -> f64, d: f64, n_modes: usize) -> Vec<f64> {
    let intervals = (64 * n_modes).max(4 * n_modes + 1).max(64);
    let intervals = intervals + intervals % 2;
    let h = 2.0 * d / intervals as f64;
    let samples: Vec<f64> = (0..=intervals)
        .map(|i| {
            let x = i as f64 * h;
            f(if x <= d { x } else { 2.0 * d - x })
        })
        .collect();
    (1..=n_modes)
        .map(|n| {
            let mu = PI * (2 * n - 1) as f64 / (2.0 * d);
            let mut acc = 0.0;
            for (i, v) in samples.iter().enumerate() {
                let w = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * v * (mu * i as f64 * h).sin();
            }
            acc * h / 3.0 / d
        })
        .collect()
}

/// Least-squares fit of `log(peak)` against time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Negated slope: positive for a decaying envelope.
    pub rate: f64,
    pub r_squared: f64,
    pub peaks: usize,
}

/// Minimum number of envelope peaks for a fit.
pub const MIN_PEAKS: usize = 3;

/// Fits the exponential envelope of `|column − limit|` over `window`.
pub fn fit_decay_rate(trajectory: &Trajectory, field: Field, limit: f64, window: (f64, f64)) -> Result<DecayFit> {
    fit_decay_rate_series(trajectory.column(Field::Time), trajectory.column(field), limit, window)
}

/// [`fit_decay_rate`] on raw time/value slices.
pub fn fit_decay_rate_series(t: &[f64], values: &[f64], limit: f64, window: (f64, f64)) -> Result<DecayFit> {
    if t.len() != values.len() {
        return Err(domain("time and value series differ in length"));
    }
    let (lo, hi) = window;
    let span = match (t.first(), t.last()) {
        (Some(&first), Some(&last)) => (first, last),
        _ => return Err(Error::InsufficientData { found: 0, needed: MIN_PEAKS }),
    };
    if lo < span.0 - 1e-9 || hi > span.1 + 1e-9 || !(lo < hi) {
        return Err(domain(format!("window [{lo}, {hi}] not inside [{}, {}]", span.0, span.1)));
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - limit).abs()).collect();
    let mut peaks = Vec::new();
    for i in 1..dev.len().saturating_sub(1) {
        if t[i] < lo || t[i] > hi {
            continue;
        }
        if dev[i] > dev[i - 1] && dev[i] >= dev[i + 1] && dev[i] > 0.0 {
            peaks.push((t[i], dev[i].ln()));
        }
    }
    if peaks.len() < MIN_PEAKS {
        return Err(Error::InsufficientData { found: peaks.len(), needed: MIN_PEAKS });
    }
    let n = peaks.len() as f64;
    let mean_t = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = peaks.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = peaks.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let syy: f64 = peaks.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit { rate: -slope, r_squared, peaks: peaks.len() })
}

/// Largest `|column − reference|` over the closed window `[lo, hi]`.
pub fn envelope(trajectory: &Trajectory, field: Field, reference: f64, window: (f64, f64)) -> f64 {
    trajectory
        .t
        .iter()
        .zip(trajectory.column(field))
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(_, v)| (v - reference).abs())
        .fold(0.0, f64::max)
}

/// `sup e^(λt)·|column − reference|` over `[lo, hi]`: the estimate error in
/// the exponentially re-weighted coordinates.
pub fn reweighted_residual(trajectory: &Trajectory, field: Field, reference: f64, lambda: f64, window: (f64, f64)) -> f64 {
    trajectory
        .t
        .iter()
        .zip(trajectory.column(field))
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (lambda * t).exp() * (v - reference).abs())
        .fold(0.0, f64::max)
}
