//! Delay-compensated unbiased extremum seeker.
//!
//! The plant is a static map measured through a known input/output delay,
//! `y(t) = Q(θ(t − D))`. The seeker applies `θ(t) = θ̂(t) + S(t + D)` and
//! updates its estimate with the predictor-style law
//!
//! ```text
//! θ̂' = −k·G(t) − k·Ĥ(t)·(θ̂(t) − θ̂(t − D))
//! ```
//!
//! where the integral of the transport state over the delay line has been
//! replaced by the difference of the current and delayed estimates. Both the
//! applied input and the estimate are kept in time-stamped histories so that
//! stage-time lookups at `τ − D` can be interpolated.

use log::warn;

use crate::demod::{filter_derivative, gradient_estimate, hessian_estimate, FilterState};
use crate::engine::{rk4_step, HistoryBuffer, Sample, Trajectory};
use crate::error::{domain, Result};
use crate::maps::{QuadraticMap, StaticMap};
use crate::signals::{additive_dither_delay, DitherParams};
use crate::validation::{ConditionCheck, ValidationReport};

/// Initial values of the estimate and filter states (zero by default).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialConditions {
    pub estimate: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayLoopParams {
    pub k: f64,
    /// `dither.d` is the lumped input/output delay.
    pub dither: DitherParams,
    pub omega_h: f64,
    pub map: QuadraticMap,
    pub dt: f64,
    pub horizon: f64,
    /// Record every `sample_stride`-th step.
    pub sample_stride: usize,
    pub initial: InitialConditions,
}

impl DelayLoopParams {
    /// The benchmark scenario: `Q(θ) = 1 + (θ − 2)²` behind a 5 s delay with
    /// `k = 0.03, a = 0.8, ω = 5, ω_h = 1, λ = 0.04`, zero initial conditions.
    pub fn benchmark() -> Self {
        let dither = DitherParams { a: 0.8, omega: 5.0, lambda: 0.04, d: 5.0 };
        Self {
            k: 0.03,
            dither,
            omega_h: 1.0,
            map: QuadraticMap::benchmark(),
            dt: default_dt(&dither),
            horizon: 300.0,
            sample_stride: 5,
            initial: InitialConditions::default(),
        }
    }

    /// Checks structural invariants (not the convergence conditions, see
    /// [`validate_params_delay`]).
    pub fn check(&self) -> Result<()> {
        self.dither.validate()?;
        self.map.validate()?;
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(domain(format!("adaptation gain k must be positive, got {}", self.k)));
        }
        if !(self.omega_h > 0.0 && self.omega_h.is_finite()) {
            return Err(domain(format!("filter corner ω_h must be positive, got {}", self.omega_h)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(domain(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(domain(format!("horizon must be non-negative, got {}", self.horizon)));
        }
        if self.dither.d > 0.0 && self.dither.d < self.dt {
            return Err(domain(format!(
                "delay {} is shorter than the time step {}; stage lookups would need extrapolation",
                self.dither.d, self.dt
            )));
        }
        if self.sample_stride == 0 {
            return Err(domain("sample stride must be at least 1"));
        }
        Ok(())
    }

    /// Whole number of steps covering the horizon, never coarser than `dt`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Copy with `dt` shrunk so that [`Self::steps`] steps end exactly at the horizon.
    pub fn aligned(&self) -> Self {
        let steps = self.steps();
        if steps == 0 {
            return *self;
        }
        Self { dt: self.horizon / steps as f64, ..*self }
    }
}

/// `min(Π/40, D/50)` with `Π = 2π/ω`; just `Π/40` when there is no delay.
pub fn default_dt(dither: &DitherParams) -> f64 {
    let by_period = dither.period() / 40.0;
    if dither.d > 0.0 {
        by_period.min(dither.d / 50.0)
    } else {
        by_period
    }
}

/// Checks `λ < ω_h/2` and `k > λ/H` for an assumed Hessian `h_assumed`.
pub fn validate_params_delay(params: &DelayLoopParams, h_assumed: f64) -> ValidationReport {
    let lambda = params.dither.lambda;
    ValidationReport {
        checks: vec![
            ConditionCheck::less_than("lambda < omega_h/2", lambda, params.omega_h / 2.0),
            ConditionCheck::greater_than("k > lambda/H", params.k, lambda / h_assumed),
        ],
    }
}

/// Closed-loop state: estimate, filter, clock and the two delay lines.
#[derive(Debug, Clone)]
pub struct DelayLoopState {
    pub theta_hat: f64,
    pub filter: FilterState,
    pub t: f64,
    step: u64,
    estimate_history: HistoryBuffer,
    input_history: HistoryBuffer,
}

impl DelayLoopState {
    pub fn new(params: &DelayLoopParams) -> Result<Self> {
        params.check()?;
        let theta_hat = params.initial.estimate;
        let mut estimate_history = HistoryBuffer::for_delay(params.dither.d, params.dt);
        let mut input_history = HistoryBuffer::for_delay(params.dither.d, params.dt);
        estimate_history.push(0.0, theta_hat)?;
        input_history.push(0.0, theta_hat + additive_dither_delay(0.0, &params.dither))?;
        Ok(Self {
            theta_hat,
            filter: FilterState::new(params.initial.eta, params.omega_h)?,
            t: 0.0,
            step: 0,
            estimate_history,
            input_history,
        })
    }

    pub fn estimate_history(&self) -> &HistoryBuffer {
        &self.estimate_history
    }

    pub fn input_history(&self) -> &HistoryBuffer {
        &self.input_history
    }

    /// `θ̂(t − D)`, held at `θ̂(0)` before the run starts.
    pub fn delayed_estimate(&self, params: &DelayLoopParams) -> Result<f64> {
        if params.dither.d == 0.0 {
            return Ok(self.theta_hat);
        }
        self.estimate_history.delayed_value(self.t - params.dither.d)
    }

    /// `θ(t − D)`, the input that reaches the map now.
    pub fn delayed_input(&self, params: &DelayLoopParams) -> Result<f64> {
        if params.dither.d == 0.0 {
            return Ok(actuator_value(self, params));
        }
        self.input_history.delayed_value(self.t - params.dither.d)
    }
}

/// `−k·G − k·Ĥ·(current − delayed)`.
pub fn update_law(k: f64, grad: f64, hess: f64, current: f64, delayed: f64) -> f64 {
    -k * grad - k * hess * (current - delayed)
}

/// `θ̂'` for given gradient and Hessian estimates, using the stored history.
pub fn theta_hat_derivative(state: &DelayLoopState, params: &DelayLoopParams, grad: f64, hess: f64) -> Result<f64> {
    let delayed = state.delayed_estimate(params)?;
    Ok(update_law(params.k, grad, hess, state.theta_hat, delayed))
}

/// `θ(t) = θ̂(t) + S(t + D)`.
pub fn actuator_value(state: &DelayLoopState, params: &DelayLoopParams) -> f64 {
    state.theta_hat + additive_dither_delay(state.t, &params.dither)
}

/// Snapshot of every recorded quantity at the current time.
pub fn observe<M: StaticMap>(state: &DelayLoopState, params: &DelayLoopParams, map: &M) -> Result<Sample> {
    let y = map.eval(state.delayed_input(params)?);
    Ok(Sample {
        t: state.t,
        theta: actuator_value(state, params),
        y,
        estimate: state.theta_hat,
        grad: gradient_estimate(state.t, y, &state.filter, &params.dither)?,
        hess: hessian_estimate(state.t, y, &state.filter, &params.dither)?,
        eta: state.filter.eta,
        plant_norm: None,
    })
}

/// Advances `(θ̂, η)` by one RK4 step and appends the new samples to both
/// delay lines. Stage-time delayed values come from the histories.
pub fn step_delay_loop<M: StaticMap>(state: &mut DelayLoopState, params: &DelayLoopParams, map: &M) -> Result<()> {
    let delay = params.dither.d;
    let dither = &params.dither;
    let omega_h = params.omega_h;
    let k = params.k;

    let snapshot = &*state;
    let next = rk4_step([state.theta_hat, state.filter.eta], state.t, params.dt, |tau, x| {
        let [estimate, eta] = *x;
        let (input, delayed_estimate) = if delay == 0.0 {
            (estimate + additive_dither_delay(tau, dither), estimate)
        } else {
            (
                snapshot.input_history.delayed_value(tau - delay)?,
                snapshot.estimate_history.delayed_value(tau - delay)?,
            )
        };
        let y = map.eval(input);
        let filter = FilterState { eta, omega_h };
        let grad = gradient_estimate(tau, y, &filter, dither)?;
        let hess = hessian_estimate(tau, y, &filter, dither)?;
        Ok([update_law(k, grad, hess, estimate, delayed_estimate), filter_derivative(&filter, y)])
    })?;

    state.step += 1;
    state.t = state.step as f64 * params.dt;
    state.theta_hat = next[0];
    state.filter.eta = next[1];
    state.estimate_history.push(state.t, state.theta_hat)?;
    let applied = actuator_value(state, params);
    state.input_history.push(state.t, applied)?;
    Ok(())
}

/// Runs the benchmark map stored in `params` over `[0, horizon]`.
pub fn run_delay_scenario(params: &DelayLoopParams) -> Result<Trajectory> {
    run_delay_with_map(params, &params.map)
}

/// Runs the loop against an arbitrary map. `params.map` is used only for the
/// parameter-condition warning.
pub fn run_delay_with_map<M: StaticMap>(params: &DelayLoopParams, map: &M) -> Result<Trajectory> {
    let params = &params.aligned();
    let report = validate_params_delay(params, params.map.hessian);
    for failed in report.failures() {
        warn!("delay loop condition violated: {} (margin {:+.4e})", failed.name, failed.margin);
    }
    let mut state = DelayLoopState::new(params)?;
    let mut traj = Trajectory::new(params.dt * params.sample_stride as f64);
    traj.push(observe(&state, params, map)?);
    let steps = params.steps();
    for n in 1..=steps {
        step_delay_loop(&mut state, params, map)?;
        if n % params.sample_stride == 0 || n == steps {
            traj.push(observe(&state, params, map)?);
        }
    }
    Ok(traj)
}
