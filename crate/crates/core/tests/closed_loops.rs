use approx::assert_abs_diff_eq;

use ues_core::delay_es::{run_delay_scenario, run_delay_with_map, DelayLoopParams};
use ues_core::diffusion_es::{run_diffusion_from, DiffusionLoopParams, DiffusionLoopState};
use ues_core::engine::{Field, CSV_HEADER};
use ues_core::maps::{FnMap, QuadraticMap};
use ues_core::oracle::fit_decay_rate;
use ues_core::Error;

#[test]
fn delay_fit_over_long_window() {
    let traj = run_delay_scenario(&DelayLoopParams::benchmark()).unwrap();
    let fit = fit_decay_rate(&traj, Field::Estimate, 2.0, (100.0, 300.0)).unwrap();
    assert!((0.03..=0.06).contains(&fit.rate), "{fit:?}");
}

#[test]
fn callback_map_matches_quadratic_map() {
    let params = DelayLoopParams { horizon: 60.0, ..DelayLoopParams::benchmark() };
    let quad = QuadraticMap::benchmark();
    let via_struct = run_delay_scenario(&params).unwrap();
    let via_fn = run_delay_with_map(&params, &FnMap(|x: f64| quad.eval(x))).unwrap();
    for (a, b) in via_struct.column(Field::Estimate).iter().zip(via_fn.column(Field::Estimate)) {
        assert_abs_diff_eq!(a, b, epsilon = 0.0);
    }
}

#[test]
fn non_quadratic_map_still_seeks_its_maximum() {
    // Smooth map with a maximum at θ = 1.5; the seeker follows −k·G.
    let map = FnMap(|x: f64| 3.0 + (x - 1.5).powi(2) + 0.1 * (x - 1.5).powi(4));
    let params = DelayLoopParams { horizon: 300.0, ..DelayLoopParams::benchmark() };
    let traj = run_delay_with_map(&params, &map).unwrap();
    assert_abs_diff_eq!(traj.last().unwrap().theta, 1.5, epsilon = 1e-2);
}

#[test]
fn diffusion_from_nonzero_start() {
    let params = DiffusionLoopParams {
        horizon: 200.0,
        initial: ues_core::delay_es::InitialConditions { estimate: 1.0, eta: 0.0 },
        ..DiffusionLoopParams::benchmark()
    };
    let state = DiffusionLoopState::new(&params).unwrap();
    let traj = run_diffusion_from(state, &params, &params.map).unwrap();
    assert_abs_diff_eq!(traj.last().unwrap().theta, 2.0, epsilon = 1e-2);
}

#[test]
fn csv_has_fixed_header_and_full_precision() {
    let params = DelayLoopParams { horizon: 1.0, ..DelayLoopParams::benchmark() };
    let traj = run_delay_scenario(&params).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), traj.len());
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 7);
        assert_eq!(row[1], traj.theta[i]);
        assert_eq!(row[3], traj.estimate[i]);
    }
}

#[test]
fn long_horizon_fails_loudly() {
    // Round-off in y − η is amplified by e^(2λt); the run must stop with an
    // error rather than return non-finite samples.
    let params = DelayLoopParams { horizon: 9000.0, ..DelayLoopParams::benchmark() };
    match run_delay_scenario(&params) {
        Err(Error::HorizonOverflow { .. } | Error::NumericalBlowup { .. }) => {}
        other => panic!("expected an overflow error, got {:?}", other.map(|t| t.len())),
    }
}
