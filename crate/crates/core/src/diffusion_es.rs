//! Diffusion-compensated unbiased extremum seeker.
//!
//! The actuator is a heat equation on `[0, D]` driven by a Neumann flux at
//! `x = D`, whose flux at `x = 0` is integrated into the map input:
//!
//! ```text
//! θ' = ∂_x α(0,t),   ∂_t α = ∂_xx α,   α(0,t) = 0,   ∂_x α(D,t) = Θ'(t)
//! ```
//!
//! The seeker commands `Θ = Θ̂ + S(t)` with the motion-planned dither `S`, so
//! the map input sees `e^(−λt)·a·sin(ωt)`, and updates
//!
//! ```text
//! Θ̂' = −k·G − k·Ĥ·(Θ̂ − θ + e^(−λt)·a·sin(ωt))
//! ```
//!
//! The ODE states `(Θ̂, η)` advance with RK4 while the plant advances with
//! Crank–Nicolson; the two exchange coupling values once per step.

use log::warn;

use crate::delay_es::InitialConditions;
use crate::demod::{filter_derivative, gradient_estimate, hessian_estimate, FilterState};
use crate::engine::{crank_nicolson_heat_step, rk4_step, RightBoundary, Sample, Trajectory};
use crate::error::{domain, Result};
use crate::maps::{QuadraticMap, StaticMap};
use crate::signals::{decaying_dither, DitherParams, MotionPlan};
use crate::validation::{ConditionCheck, ValidationReport};

/// Minimum number of grid cells.
pub const MIN_CELLS: usize = 8;

/// Heat-equation actuator `α(x,t)` on a uniform grid plus the integrator `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPlantState {
    pub alpha: Vec<f64>,
    pub theta: f64,
    pub h: f64,
    pub n_cells: usize,
}

impl DiffusionPlantState {
    /// Zero field on `[0, length]` split into `n_cells` cells.
    pub fn new(length: f64, n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(domain(format!("need at least {MIN_CELLS} cells, got {n_cells}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(domain(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { alpha: vec![0.0; n_cells + 1], theta: 0.0, h: length / n_cells as f64, n_cells })
    }

    /// Plant with a prescribed initial profile sampled at the grid nodes.
    /// The Dirichlet node is forced to zero.
    pub fn with_profile(length: f64, n_cells: usize, profile: impl Fn(f64) -> f64) -> Result<Self> {
        let mut plant = Self::new(length, n_cells)?;
        for (i, a) in plant.alpha.iter_mut().enumerate().skip(1) {
            *a = profile(i as f64 * plant.h);
        }
        Ok(plant)
    }

    pub fn length(&self) -> f64 {
        self.h * self.n_cells as f64
    }

    /// `∂_x α(0,t)` from the second-order one-sided stencil.
    pub fn output_flux(&self) -> f64 {
        (-3.0 * self.alpha[0] + 4.0 * self.alpha[1] - self.alpha[2]) / (2.0 * self.h)
    }

    /// `(α_1 − α_0)/h`, the flux that exactly balances the Crank–Nicolson
    /// mass budget of the trapezoidal `∫α dx`. It is second order as well,
    /// since `α(0,t) ≡ 0` forces `∂_xx α(0,t) = 0`.
    pub fn conservative_output_flux(&self) -> f64 {
        (self.alpha[1] - self.alpha[0]) / self.h
    }

    /// Trapezoidal `∫_0^D α dx`.
    pub fn mass(&self) -> f64 {
        let n = self.n_cells;
        let inner: f64 = self.alpha[1..n].iter().sum();
        (inner + 0.5 * (self.alpha[0] + self.alpha[n])) * self.h
    }

    /// `∂_x α(D,t)` from the second-order one-sided stencil.
    pub fn input_flux(&self) -> f64 {
        let n = self.n_cells;
        (3.0 * self.alpha[n] - 4.0 * self.alpha[n - 1] + self.alpha[n - 2]) / (2.0 * self.h)
    }

    /// Discrete `L2[0, D]` norm (trapezoidal rule).
    pub fn l2_norm(&self) -> f64 {
        let n = self.n_cells;
        let inner: f64 = self.alpha[1..n].iter().map(|a| a * a).sum();
        let ends = 0.5 * (self.alpha[0] * self.alpha[0] + self.alpha[n] * self.alpha[n]);
        ((inner + ends) * self.h).sqrt()
    }

    /// Advances the field by one Crank–Nicolson step with `∂_x α(D) = boundary_flux`
    /// held over the step, then integrates `θ' = ∂_x α(0,t)` with the trapezoidal
    /// rule.
    ///
    /// `θ + ∫α dx − ∫boundary_flux dt` is conserved to round-off.
    pub fn plant_step(&mut self, boundary_flux: f64, dt: f64) -> Result<()> {
        let before = self.conservative_output_flux();
        self.alpha = crank_nicolson_heat_step(&self.alpha, 0.0, RightBoundary::Neumann(boundary_flux), self.h, dt, 0.0)?;
        self.alpha[0] = 0.0;
        let after = self.conservative_output_flux();
        self.theta += 0.5 * dt * (before + after);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionLoopParams {
    pub k: f64,
    /// `dither.d` is the length of the diffusion domain.
    pub dither: DitherParams,
    pub omega_h: f64,
    pub map: QuadraticMap,
    pub dt: f64,
    pub horizon: f64,
    pub n_cells: usize,
    pub sample_stride: usize,
    pub initial: InitialConditions,
}

impl DiffusionLoopParams {
    /// Benchmark map behind a unit-length diffusion actuator with the same
    /// seeker gains as the delay benchmark.
    pub fn benchmark() -> Self {
        let dither = DitherParams { a: 0.8, omega: 5.0, lambda: 0.04, d: 1.0 };
        Self {
            k: 0.03,
            dither,
            omega_h: 1.0,
            map: QuadraticMap::benchmark(),
            dt: default_dt(&dither),
            horizon: 300.0,
            n_cells: 100,
            sample_stride: 5,
            initial: InitialConditions::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        self.dither.validate()?;
        self.map.validate()?;
        if !(self.dither.d > 0.0) {
            return Err(domain("diffusion domain length must be positive"));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(domain(format!("adaptation gain k must be non-negative, got {}", self.k)));
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
        if self.n_cells < MIN_CELLS {
            return Err(domain(format!("need at least {MIN_CELLS} cells, got {}", self.n_cells)));
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

/// `Π/100`: the coupling between the ODE and PDE halves is exchanged once per
/// step, so the diffusion loop runs finer than the delay loop.
pub fn default_dt(dither: &DitherParams) -> f64 {
    dither.period() / 100.0
}

/// Checks `λ < min(ω_h/2, π²/(4D²))` and `k > λ/H`.
pub fn validate_params_diffusion(k: f64, dither: &DitherParams, omega_h: f64, h_assumed: f64) -> ValidationReport {
    let lambda = dither.lambda;
    let slowest_mode = std::f64::consts::PI.powi(2) / (4.0 * dither.d * dither.d);
    ValidationReport {
        checks: vec![
            ConditionCheck::less_than("lambda < omega_h/2", lambda, omega_h / 2.0),
            ConditionCheck::less_than("lambda < pi^2/(4D^2)", lambda, slowest_mode),
            ConditionCheck::greater_than("k > lambda/H", k, lambda / h_assumed),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionLoopState {
    /// `Θ̂`
    pub estimate: f64,
    pub plant: DiffusionPlantState,
    pub filter: FilterState,
    pub t: f64,
    step: u64,
}

impl DiffusionLoopState {
    /// Plant at rest at `θ(0) = Θ(0) = params.initial.estimate`, with
    /// `Θ̂(0) = Θ(0) − S(0)` so that `Θ − θ − ∫α dx` starts at zero.
    pub fn new(params: &DiffusionLoopParams) -> Result<Self> {
        params.check()?;
        let plan = MotionPlan::new(&params.dither)?;
        let mut plant = DiffusionPlantState::new(params.dither.d, params.n_cells)?;
        plant.theta = params.initial.estimate;
        Ok(Self {
            estimate: params.initial.estimate - plan.dither(0.0),
            plant,
            filter: FilterState::new(params.initial.eta, params.omega_h)?,
            t: 0.0,
            step: 0,
        })
    }

    /// Actuator command `Θ = Θ̂ + S(t)`.
    pub fn command(&self, plan: &MotionPlan) -> f64 {
        self.estimate + plan.dither(self.t)
    }

    /// Replaces the initial plant. The estimate is re-anchored to
    /// `θ + ∫α dx − S(t)` so the plant invariant stays zero.
    pub fn with_plant(mut self, plant: DiffusionPlantState, plan: &MotionPlan) -> Result<Self> {
        if plant.n_cells < MIN_CELLS || plant.alpha.len() != plant.n_cells + 1 {
            return Err(domain("plant grid is inconsistent"));
        }
        self.estimate = plant.theta + plant.mass() - plan.dither(self.t);
        self.plant = plant;
        Ok(self)
    }

    /// `Θ − θ − ∫α dx`, zero for a consistent loop.
    pub fn invariant(&self, plan: &MotionPlan) -> f64 {
        self.command(plan) - self.plant.theta - self.plant.mass()
    }
}

/// `−k·G − k·Ĥ·(Θ̂ − θ + e^(−λt)·a·sin(ωt))`.
pub fn estimate_derivative(
    t: f64,
    estimate: f64,
    theta: f64,
    grad: f64,
    hess: f64,
    k: f64,
    dither: &DitherParams,
) -> f64 {
    -k * grad - k * hess * (estimate - theta + decaying_dither(t, dither))
}

/// `Θ̂'` at the state's current time, with `θ` fed back from the plant.
pub fn theta_hat_derivative(state: &DiffusionLoopState, params: &DiffusionLoopParams, grad: f64, hess: f64) -> f64 {
    estimate_derivative(state.t, state.estimate, state.plant.theta, grad, hess, params.k, &params.dither)
}

pub fn observe<M: StaticMap>(state: &DiffusionLoopState, params: &DiffusionLoopParams, map: &M) -> Result<Sample> {
    let y = map.eval(state.plant.theta);
    Ok(Sample {
        t: state.t,
        theta: state.plant.theta,
        y,
        estimate: state.estimate,
        grad: gradient_estimate(state.t, y, &state.filter, &params.dither)?,
        hess: hessian_estimate(state.t, y, &state.filter, &params.dither)?,
        eta: state.filter.eta,
        plant_norm: Some(state.plant.l2_norm()),
    })
}

/// One split step: RK4 on `(Θ̂, η)` with `θ` extrapolated linearly from its
/// current value and rate, then a Crank–Nicolson plant step driven by the
/// step average of `Θ' = Θ̂' + Ṡ`.
///
/// The average of `Ṡ` is taken exactly from the closed form of `S`. Holding a
/// point value instead leaks `O(dt²)` into the conserved quantity
/// `Θ − θ − ∫α dx`; the resulting constant offset is amplified by the growing
/// demodulation gains and eventually destabilises the loop.
pub fn step_diffusion_loop<M: StaticMap>(
    state: &mut DiffusionLoopState,
    params: &DiffusionLoopParams,
    plan: &MotionPlan,
    map: &M,
) -> Result<()> {
    let t0 = state.t;
    let dt = params.dt;
    let theta0 = state.plant.theta;
    let theta_rate = state.plant.conservative_output_flux();
    let dither = &params.dither;
    let omega_h = params.omega_h;
    let k = params.k;

    let next = rk4_step([state.estimate, state.filter.eta], t0, dt, |tau, x| {
        let [estimate, eta] = *x;
        let theta = theta0 + (tau - t0) * theta_rate;
        let y = map.eval(theta);
        let filter = FilterState { eta, omega_h };
        let grad = gradient_estimate(tau, y, &filter, dither)?;
        let hess = hessian_estimate(tau, y, &filter, dither)?;
        Ok([estimate_derivative(tau, estimate, theta, grad, hess, k, dither), filter_derivative(&filter, y)])
    })?;

    let estimate_rate = (next[0] - state.estimate) / dt;
    let dither_rate = (plan.dither(t0 + dt) - plan.dither(t0)) / dt;
    let flux = estimate_rate + dither_rate;
    state.plant.plant_step(flux, dt)?;

    state.estimate = next[0];
    state.filter.eta = next[1];
    state.step += 1;
    state.t = state.step as f64 * dt;
    Ok(())
}

pub fn run_diffusion_scenario(params: &DiffusionLoopParams) -> Result<Trajectory> {
    let state = DiffusionLoopState::new(params)?;
    run_diffusion_from(state, params, &params.map)
}

/// Runs from an arbitrary initial state against an arbitrary map.
pub fn run_diffusion_from<M: StaticMap>(
    mut state: DiffusionLoopState,
    params: &DiffusionLoopParams,
    map: &M,
) -> Result<Trajectory> {
    params.check()?;
    let params = &params.aligned();
    let report = validate_params_diffusion(params.k, &params.dither, params.omega_h, params.map.hessian);
    for failed in report.failures() {
        warn!("diffusion loop condition violated: {} (margin {:+.4e})", failed.name, failed.margin);
    }
    let plan = MotionPlan::new(&params.dither)?;
    let mut traj = Trajectory::new(params.dt * params.sample_stride as f64);
    traj.push(observe(&state, params, map)?);
    let steps = params.steps();
    for n in 1..=steps {
        step_diffusion_loop(&mut state, params, &plan, map)?;
        if n % params.sample_stride == 0 || n == steps {
            traj.push(observe(&state, params, map)?);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Field;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn benchmark_passes_conditions() {
        let p = DiffusionLoopParams::benchmark();
        assert!(validate_params_diffusion(p.k, &p.dither, p.omega_h, 2.0).all_passed());
        let hot = DitherParams { lambda: 3.0, ..p.dither };
        let report = validate_params_diffusion(10.0, &hot, 10.0, 2.0);
        let failed: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
        assert_eq!(failed, vec!["lambda < pi^2/(4D^2)".to_string()]);
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(DiffusionPlantState::new(1.0, MIN_CELLS - 1).is_err());
        assert!(DiffusionPlantState::new(0.0, 20).is_err());
        let p = DiffusionLoopParams { n_cells: 4, ..DiffusionLoopParams::benchmark() };
        assert!(DiffusionLoopState::new(&p).is_err());
    }

    #[test]
    fn initial_estimate_offsets_dither() {
        let p = DiffusionLoopParams::benchmark();
        let state = DiffusionLoopState::new(&p).unwrap();
        let plan = MotionPlan::new(&p.dither).unwrap();
        assert!((state.estimate + 1.8488877694243478).abs() < 1e-13);
        assert_eq!(state.command(&plan), 0.0);
        let s = observe(&state, &p, &p.map).unwrap();
        assert_eq!(s.grad, 0.0);
        assert_eq!(s.plant_norm, Some(0.0));
    }

    #[test]
    fn dirichlet_node_stays_pinned() {
        let mut plant = DiffusionPlantState::new(1.0, 50).unwrap();
        for n in 0..200 {
            plant.plant_step((n as f64 * 0.1).sin(), 0.01).unwrap();
            assert_eq!(plant.alpha[0], 0.0);
        }
    }

    #[test]
    fn insulated_plant_dissipates() {
        let mut plant = DiffusionPlantState::with_profile(1.0, 64, |x| x * (1.0 - x) + 0.3 * x).unwrap();
        let mut previous = plant.l2_norm();
        for _ in 0..500 {
            plant.plant_step(0.0, 0.005).unwrap();
            let norm = plant.l2_norm();
            assert!(norm <= previous + 1e-15);
            previous = norm;
        }
    }

    #[test]
    fn slowest_mode_manufactured_solution() {
        // α = sin(πx/2)·e^(−π²t/4) has zero flux at x = 1 and
        // θ(t) = (2/π)(1 − e^(−π²t/4)).
        let mut plant = DiffusionPlantState::with_profile(1.0, 200, |x| (PI * x / 2.0).sin()).unwrap();
        let dt = 1e-3;
        for _ in 0..1000 {
            plant.plant_step(0.0, dt).unwrap();
        }
        let decay = (-PI * PI / 4.0).exp();
        assert!((plant.theta - 2.0 / PI * (1.0 - decay)).abs() < 1e-4, "θ = {}", plant.theta);
        let mid = plant.alpha[100];
        assert!((mid - (PI / 4.0).sin() * decay).abs() < 1e-4);
        assert!((plant.output_flux() - PI / 2.0 * decay).abs() < 1e-3);
        assert!(plant.input_flux().abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn plant_budget_is_exact(fluxes in proptest::collection::vec(-3.0f64..3.0, 1..60), dt in 1e-3f64..0.1) {
            let mut plant = DiffusionPlantState::new(1.0, 32).unwrap();
            let mut injected = 0.0;
            for f in &fluxes {
                plant.plant_step(*f, dt).unwrap();
                injected += f * dt;
            }
            prop_assert!((plant.theta + plant.mass() - injected).abs() < 1e-12);
        }
    }

    #[test]
    fn loop_preserves_plant_invariant() {
        let p = DiffusionLoopParams { horizon: 60.0, ..DiffusionLoopParams::benchmark() };
        let plan = MotionPlan::new(&p.dither).unwrap();
        let mut state = DiffusionLoopState::new(&p).unwrap();
        for _ in 0..(60.0 / p.dt) as usize {
            step_diffusion_loop(&mut state, &p, &plan, &p.map).unwrap();
        }
        let invariant = state.invariant(&plan);
        assert!(invariant.abs() < 1e-11, "{invariant}");
    }

    #[test]
    fn open_loop_tracks_planned_dither_exactly_from_compatible_state() {
        let p = DiffusionLoopParams { k: 0.0, horizon: 30.0, n_cells: 200, ..DiffusionLoopParams::benchmark() };
        let plan = MotionPlan::new(&p.dither).unwrap();
        let plant = DiffusionPlantState::with_profile(1.0, 200, |x| plan.beta_t(x, 0.0)).unwrap();
        let state = DiffusionLoopState::new(&p).unwrap().with_plant(plant, &plan).unwrap();
        assert!(state.estimate.abs() < 1e-4, "Θ̂(0) = {}", state.estimate);
        assert_eq!(state.invariant(&plan), 0.0);
        let traj = run_diffusion_from(state, &p, &p.map).unwrap();
        for i in 0..traj.len() {
            let s = traj.sample(i);
            assert!((s.theta - decaying_dither(s.t, &p.dither)).abs() < 1e-3, "t={} θ={}", s.t, s.theta);
        }
    }

    #[test]
    fn open_loop_from_rest_settles_onto_shifted_dither() {
        let p = DiffusionLoopParams { k: 0.0, horizon: 30.0, ..DiffusionLoopParams::benchmark() };
        let plan = MotionPlan::new(&p.dither).unwrap();
        let traj = run_diffusion_scenario(&p).unwrap();
        for i in 0..traj.len() {
            let s = traj.sample(i);
            if s.t >= 10.0 {
                let target = decaying_dither(s.t, &p.dither) - plan.dither(0.0);
                assert!((s.theta - target).abs() < 1e-3, "t={}", s.t);
            }
        }
    }

    #[test]
    fn zero_horizon_gives_initial_sample() {
        let p = DiffusionLoopParams { horizon: 0.0, ..DiffusionLoopParams::benchmark() };
        assert_eq!(run_diffusion_scenario(&p).unwrap().len(), 1);
    }

    #[test]
    fn benchmark_converges_to_optimum() {
        let p = DiffusionLoopParams { horizon: 200.0, ..DiffusionLoopParams::benchmark() };
        let traj = run_diffusion_scenario(&p).unwrap();
        assert!(traj.max_deviation_after(Field::Theta, 2.0, 180.0) < 1e-2);
        assert!(traj.plant_norm.iter().all(|v| v.is_finite()));
    }
}
