mod common;

use roslab::fluid::*;
use roslab::primitives::DistributionSpec;
use roslab::scaling::build_mth_system;
use roslab::simulator::{NullSink, Simulation, SystemConfig};
use roslab::{Error, TestFunction};

fn single_params(patience: DistributionSpec) -> FluidParams {
    FluidParams {
        arrival_rates: vec![3.0],
        service_rates: vec![1.0],
        weights: vec![1.0],
        servers: 1,
        patience: vec![patience],
        arrival_start: vec![],
    }
}

fn reference_setup(dt: f64) -> (FluidParams, FluidState<f64>, FluidOptions) {
    let cfg = common::reference(5.0);
    let params = FluidParams::from_config(&cfg).unwrap();
    let init = FluidInitial::from_config(&cfg).unwrap();
    let opts = FluidOptions::new(dt).with_functionals([TestFunction::exp(1.0)]);
    let st = initial_state(&params, &init, &opts).unwrap();
    (params, st, opts)
}

#[test]
fn mass_examples() {
    assert_eq!(weighted_mass(&[2.0, 3.0], &[0.25, 0.75]), 2.75);
    assert_eq!(adjusted_mass(&[2.0, 3.0], &[0.25, 0.75], &[1.0, 3.0]), 1.25);
    assert_eq!(load(&[3.0, 1.0], &[2.0, 1.0], 2), 1.25);
}

#[test]
fn delayed_arrivals_and_zero_start_give_zero_path() {
    let mut params = single_params(DistributionSpec::exponential(1.0));
    params.arrival_start = vec![100.0];
    let opts = FluidOptions::new(1e-2);
    let st = initial_state::<f64>(&params, &FluidInitial::zero(&params), &opts).unwrap();
    let path = fluid_solve(&params, &st, 5.0, &opts).unwrap();
    assert!(path.z.iter().all(|z| z[0] == 0.0));
    assert!(path.final_state.is_zero());

    params.arrival_start = vec![];
    assert!(matches!(fluid_solve(&params, &st, 5.0, &opts), Err(Error::Precondition(_))));
}

#[test]
fn single_class_fixed_point_and_stationarity() {
    let params = single_params(DistributionSpec::exponential(1.0));
    let inv = invariant_state::<f64>(&params, &InvariantOptions::default()).unwrap();
    assert!((inv.z()[0] - 2.0).abs() < 1e-3, "{}", inv.z()[0]);
    let opts = FluidOptions::new(inv.dx);
    let path = fluid_solve(&params, &inv, 10.0, &opts).unwrap();
    let drift = path.z.iter().map(|z| (z[0] / inv.z()[0] - 1.0).abs()).fold(0.0, f64::max);
    assert!(drift < 0.01, "{drift}");
}

#[test]
fn invariant_state_in_f32() {
    let params = single_params(DistributionSpec::exponential(1.0));
    let inv = invariant_state::<f32>(&params, &InvariantOptions { tolerance: 1e-5, ..Default::default() }).unwrap();
    assert!((inv.z()[0] - 2.0).abs() < 5e-3, "{}", inv.z()[0]);
}

#[test]
fn invariant_state_needs_overload() {
    let mut params = single_params(DistributionSpec::exponential(1.0));
    params.arrival_rates = vec![0.5];
    assert!(matches!(invariant_state::<f64>(&params, &InvariantOptions::default()), Err(Error::Precondition(_))));
}

#[test]
fn symmetric_classes_share_the_fixed_point() {
    let params = FluidParams {
        arrival_rates: vec![1.5, 1.5],
        service_rates: vec![1.0, 1.0],
        weights: vec![0.5, 0.5],
        servers: 2,
        patience: vec![DistributionSpec::exponential(1.0); 2],
        arrival_start: vec![],
    };
    let inv = invariant_state::<f64>(&params, &InvariantOptions::default()).unwrap();
    let z = inv.z();
    assert_eq!(z[0], z[1]);
}

#[test]
fn functional_examples() {
    let dt = 1e-3;
    let init = FluidInitial { masses: vec![2.0], laws: vec![DistributionSpec::exponential(1.0)] };
    let st = FluidState::<f64>::from_initial(&init, dt, 40_000);
    assert!((st.pairing(0, &TestFunction::exp(1.0)) - 1.0).abs() < 1e-5);
    assert_eq!(st.pairing(0, &TestFunction::Indicator), st.z()[0]);
    let zero = FluidState::<f64>::zero(1, 10, dt);
    assert_eq!(zero.pairing(0, &TestFunction::exp(1.0)), 0.0);

    let (params, st, opts) = reference_setup(1e-2);
    let path = fluid_solve(&params, &st, 1.0, &opts).unwrap();
    assert_eq!(path.functional(&TestFunction::Indicator, 0.5, 1).unwrap(), path.z[50][1]);
    let err = path.functional(&TestFunction::exp(3.0), 0.5, 0).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn survival_stays_monotone_and_nonnegative() {
    let (params, st, mut opts) = reference_setup(1e-2);
    opts.snapshot_every = Some(50);
    let path = fluid_solve(&params, &st, 5.0, &opts).unwrap();
    for s in path.snapshots.iter().chain([&path.final_state]) {
        for f in &s.survival {
            assert!(f.iter().all(|&v| v >= 0.0));
            assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }
    assert!(path.z.iter().all(|z| z.iter().sum::<f64>() > 0.0));
    assert!(path.mass_balance_residual <= 5.0 * opts.dt * (1.0 + 2.6));
}

#[test]
fn residual_is_small_and_second_order() {
    let f = TestFunction::exp(1.0);
    let mut res = Vec::new();
    for dt in [2e-3, 1e-3] {
        let (params, st, opts) = reference_setup(dt);
        let r = fluid_residual(&params, &st, 5.0, &opts, &f).unwrap();
        assert!(r.max_abs <= 5.0 * dt, "{r:?}");
        res.push(r.max_abs);
    }
    assert!(res[0] / res[1] >= 1.8, "{res:?}");
}

#[test]
fn restart_matches_continuous_solve() {
    let (params, st, opts) = reference_setup(1e-2);
    let mut o = opts.clone();
    o.snapshot_every = Some(200);
    let full = fluid_solve(&params, &st, 4.0, &o).unwrap();
    let mid = full.snapshot_at(2.0).unwrap().clone();
    let rest = fluid_solve(&params, &mid, 2.0, &opts).unwrap();
    let a = &full.final_state.survival;
    let b = &rest.final_state.survival;
    let diff = a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max);
    assert!(diff <= 2.0 * 5.0 * opts.dt, "{diff}");
    assert!((full.final_state.t - rest.final_state.t).abs() < 1e-9);
}

#[test]
fn survival_dump_and_csv() {
    let (params, st, opts) = reference_setup(1e-1);
    let path = fluid_solve(&params, &st, 0.3, &opts).unwrap();
    let mut csv = Vec::new();
    path.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,class,z\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 2);
    let mut dump = Vec::new();
    path.write_survival_dump(&mut dump).unwrap();
    assert!(!dump.is_empty());
}

/// Deterministic patience d, one class and server: z* = −μd / ln(1 − μ/α).
#[test]
fn deterministic_patience_fixed_point_matches_simulation() {
    let d = 2.0;
    let params = single_params(DistributionSpec::deterministic(d));
    let expected = -d / (1.0f64 - 1.0 / 3.0).ln();
    let inv = invariant_state::<f64>(&params, &InvariantOptions { dt: 5e-3, ..Default::default() }).unwrap();
    assert!((inv.z()[0] / expected - 1.0).abs() < 5e-3, "{} vs {expected}", inv.z()[0]);

    let mut cfg: SystemConfig = common::single(3.0, 1.0, 1.0, 20.0);
    cfg.patience = vec![DistributionSpec::deterministic(d)];
    let m = 10_000u64;
    let cfg = build_mth_system(&cfg, m).unwrap();
    let mut sim = Simulation::new(&cfg, 99, &mut NullSink).unwrap();
    let mut samples = Vec::new();
    for t in 10..=20 {
        sim.advance_to(t as f64 * m as f64, &mut NullSink);
        samples.push(sim.queue_lengths()[0] as f64 / m as f64);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    assert!((mean / inv.z()[0] - 1.0).abs() < 0.05, "{mean} vs {}", inv.z()[0]);
}
