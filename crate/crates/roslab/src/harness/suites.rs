//! One function per acceptance check. Each returns a judged [`Check`]; the
//! commands in `commands` group them into reports and write artifacts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

use super::config::{ExperimentConfig, Tolerances};
use super::report::Check;
use crate::error::{Error, Result};
use crate::fluid::{
    fluid_residual, fluid_solve, initial_state, invariant_state, FluidInitial, FluidOptions, FluidParams, FluidPath,
    InvariantOptions,
};
use crate::martingale::{
    arrival_decompose, martingale_zero_test_family, predictable_qv, service_decompose_all, ArrivalVariant, Driver,
    MIN_REPLICATIONS,
};
use crate::primitives::{derive_seed, replication_seed, DistributionSpec, RenewalStream, ScaleMode, StreamKind};
use crate::scaling::build_mth_system;
use crate::sde::{
    build_d, build_sde_coefficients, integrate, min_eigenvalue, psd_sqrt, ChannelInfo, CoefficientNode,
    InitialCondition, IntegrateOptions, Matrix, NoiseForm, Observables, SdeCoefficients, SdeModel,
};
use crate::simulator::{simulate, EventKind, EventLog, InitialQueue, NullSink, Replay, Simulation, SystemConfig};
use crate::stats::{ks_statistic, mean, relative_error, summarize};
use crate::testfn::TestFunction;

/// Labels separating the seeds of different suites under one master seed.
mod label {
    pub const RENEWAL: u64 = 1;
    pub const FCLT: u64 = 2;
    pub const CONSERVATION: u64 = 3;
    pub const CONVERGE: u64 = 7;
    pub const MARTINGALE: u64 = 8;
    pub const QV: u64 = 9;
    pub const CALIBRATION: u64 = 10;
    pub const DIFFUSION: u64 = 12;
    pub const SDE: u64 = 13;
}

fn suite_seed(master: u64, suite: u64) -> u64 {
    derive_seed(master, &[StreamKind::Replication as u64, 0xC0FFEE, suite])
}

/// Run `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn fluid_path(cfg: &SystemConfig, dt: f64, horizon: f64, functionals: &[TestFunction]) -> Result<FluidPath<f64>> {
    let params = FluidParams::from_config(cfg)?;
    let init = FluidInitial::from_config(cfg)?;
    let opts = FluidOptions::new(dt).with_functionals(functionals.iter().copied());
    let st = initial_state::<f64>(&params, &init, &opts)?;
    fluid_solve(&params, &st, horizon, &opts)
}

/// Pairwise same-class products, so that every pairing a D matrix reads is cached.
fn with_products(fs: &[TestFunction]) -> Vec<TestFunction> {
    let mut out = vec![TestFunction::Indicator];
    for a in fs {
        for b in fs {
            for f in [*a, a.product(b)] {
                if !out.contains(&f) {
                    out.push(f);
                }
            }
        }
    }
    out
}

/// `E(t) = O(t) + R(t)` at jump times, between jumps and at random times.
pub fn renewal_identity(tol: &Tolerances, master: u64) -> Result<Check> {
    let laws = [
        DistributionSpec::exponential(1.3),
        DistributionSpec::Gamma { shape: 2.5, rate: 2.0 },
        DistributionSpec::UniformShifted { shift: 0.2, width: 1.0 },
        DistributionSpec::Lognormal { median: 0.8, sigma: 0.5 },
        DistributionSpec::Hyperexponential { probs: vec![0.3, 0.7], rates: vec![0.5, 3.0] },
        DistributionSpec::deterministic(0.7),
    ];
    let seed = suite_seed(master, label::RENEWAL);
    let horizon = tol.renewal_horizon;
    let mut worst = 0.0f64;
    let mut evaluations = 0usize;
    let mut families = Vec::new();
    for s in 0..tol.renewal_streams {
        let law = &laws[s % laws.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[s as u64, 0]));
        let delay = (s % 2 == 1).then(|| rng.random_range(0.0..2.0));
        let mut stream = RenewalStream::new(law, delay, derive_seed(seed, &[s as u64, 1]))?;
        stream.realize_until(horizon)?;
        let mut times: Vec<f64> = stream.jumps().iter().copied().filter(|&t| t <= horizon).collect();
        let mids: Vec<f64> = stream.jumps().windows(2).map(|w| 0.5 * (w[0] + w[1])).filter(|&t| t <= horizon).collect();
        times.extend(mids);
        times.extend((0..100).map(|_| rng.random_range(0.0..horizon)));
        times.push(0.0);
        for t in times {
            let d = stream.decompose(t)?;
            worst = worst.max((d.count as f64 - d.martingale - d.remainder).abs());
            evaluations += 1;
        }
        if s < laws.len() {
            families.push(law.family());
        }
    }
    Ok(Check::new("renewal_identity", "max |E - O - R| <= tolerance", tol.renewal_identity)
        .metric("streams", tol.renewal_streams)
        .metric("families", families)
        .metric("evaluations", evaluations)
        .metric("max_abs_error", worst)
        .verdict(worst <= tol.renewal_identity))
}

/// `Var(Ê^m(1))` against `ι³σ²`.
pub fn renewal_fclt(tol: &Tolerances, master: u64) -> Result<Check> {
    let law = &tol.fclt_law;
    let mom = law.moments();
    let rate = 1.0 / mom.mean;
    let target = rate.powi(3) * mom.variance;
    let m = tol.fclt_m;
    let seed = suite_seed(master, label::FCLT);
    let samples = (0..tol.fclt_replications)
        .into_par_iter()
        .map(|r| {
            let mut s = RenewalStream::new(law, None, derive_seed(seed, &[r as u64]))?;
            s.realize_until(m)?;
            s.scaled(m, ScaleMode::Diffusion, rate)?.at(1.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let s = summarize(&samples);
    let rel = relative_error(s.variance, target);
    Ok(Check::new("renewal_fclt_variance", "relative error of variance <= tolerance", tol.fclt_relative)
        .metric("family", law.family())
        .metric("m", m)
        .metric("replications", tol.fclt_replications)
        .metric("sample_variance", s.variance)
        .metric("sample_mean", s.mean)
        .metric("target_variance", target)
        .metric("relative_error", rel)
        .verdict(rel <= tol.fclt_relative))
}

/// Outcome of scanning one log for conservation and non-idling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConservationScan {
    pub events: usize,
    pub violations: Vec<String>,
}

/// Integer queue balance `initial + queued arrivals − selections − reneges` against
/// every recorded queue length, plus "idle server ⇒ empty queues" after every event.
pub fn scan_conservation(log: &EventLog) -> ConservationScan {
    let (jn, kn) = (log.config.classes, log.config.servers);
    let mut count = vec![0i64; jn];
    let mut busy = vec![false; kn];
    let mut scan = ConservationScan::default();
    let fail = |scan: &mut ConservationScan, i: usize, msg: String| {
        if scan.violations.len() < 10 {
            scan.violations.push(format!("record {i}: {msg}"));
        }
    };
    for (i, rec) in log.records.iter().enumerate() {
        if rec.queue_lengths.len() != jn || rec.class >= jn {
            fail(&mut scan, i, "malformed record".into());
            continue;
        }
        if rec.queue_lengths.iter().zip(&count).any(|(&q, &c)| q as i64 != c) {
            fail(&mut scan, i, format!("queue lengths {:?} but balance gives {count:?}", rec.queue_lengths));
        }
        match rec.kind {
            EventKind::Initial => match rec.server {
                Some(k) if k < kn => busy[k] = true,
                Some(k) => fail(&mut scan, i, format!("unknown server {k}")),
                None => count[rec.class] += 1,
            },
            EventKind::Arrival => match rec.server {
                Some(k) if k < kn => {
                    if busy[k] {
                        fail(&mut scan, i, format!("arrival assigned to busy server {k}"));
                    }
                    if busy.iter().position(|b| !b) != Some(k) {
                        fail(&mut scan, i, format!("arrival skipped a lower idle server than {k}"));
                    }
                    busy[k] = true;
                }
                Some(k) => fail(&mut scan, i, format!("unknown server {k}")),
                None => {
                    if busy.iter().any(|b| !b) {
                        fail(&mut scan, i, "arrival queued while a server was idle".into());
                    }
                    count[rec.class] += 1;
                }
            },
            EventKind::Completion => {
                let Some(k) = rec.server.filter(|&k| k < kn) else {
                    fail(&mut scan, i, "completion without a valid server".into());
                    continue;
                };
                if !busy[k] {
                    fail(&mut scan, i, format!("completion at idle server {k}"));
                }
                match rec.selected {
                    Some(sel) if sel.class < jn => count[sel.class] -= 1,
                    Some(sel) => fail(&mut scan, i, format!("selected unknown class {}", sel.class)),
                    None => busy[k] = false,
                }
            }
            EventKind::Renege => count[rec.class] -= 1,
        }
        if count.iter().any(|&c| c < 0) {
            fail(&mut scan, i, format!("negative queue length {count:?}"));
        }
        // The state after the initial block and after every later event.
        let block_done = rec.kind != EventKind::Initial || log.records.get(i + 1).map_or(true, |r| r.kind != EventKind::Initial);
        if block_done && busy.iter().any(|b| !b) && count.iter().any(|&c| c > 0) {
            fail(&mut scan, i, format!("idle server with queues {count:?}"));
        }
        if rec.kind != EventKind::Initial {
            scan.events += 1;
        }
    }
    scan
}

/// Replay a stored log and rescan it; any inconsistency fails the check.
pub fn log_integrity(log: &EventLog) -> Check {
    let c = Check::new("log_integrity", "replay succeeds and violations == tolerance", 0.0).metric("records", log.records.len());
    if let Err(e) = Replay::run(log) {
        return c.metric("error", e.to_string()).verdict(false);
    }
    let scan = scan_conservation(log);
    let ok = scan.violations.is_empty();
    c.metric("violations", scan.violations).verdict(ok)
}

pub fn conservation(system: &SystemConfig, replications: usize, master: u64) -> Result<Check> {
    let seed = suite_seed(master, label::CONSERVATION);
    let scans = (0..replications)
        .into_par_iter()
        .map(|r| simulate(system, replication_seed(seed, 1, r as u64)).map(|log| scan_conservation(&log)))
        .collect::<Result<Vec<_>>>()?;
    let events: usize = scans.iter().map(|s| s.events).sum();
    let bad: Vec<String> = scans
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.violations.is_empty())
        .map(|(r, s)| format!("replication {r}: {}", s.violations[0]))
        .take(10)
        .collect();
    Ok(Check::new("conservation_non_idling", "violations == tolerance", 0.0)
        .metric("replications", replications)
        .metric("load", system.load()?)
        .metric("events_checked", events)
        .metric("violations", &bad)
        .verdict(bad.is_empty()))
}

/// Two runs of the same (config, seed) give identical bytes; the hash matches `golden`.
pub fn determinism(system: &SystemConfig, golden: Option<&str>) -> Result<Check> {
    let a = simulate(system, system.seed)?;
    let b = simulate(system, system.seed)?;
    let bytes_a = a.to_jsonl();
    let identical = bytes_a == b.to_jsonl();
    let reread = EventLog::read_jsonl(bytes_a.as_slice())?;
    let roundtrip = reread.to_jsonl() == bytes_a;
    let hash = a.hash();
    let golden_ok = golden.map(|g| g == hash);
    let mut c = Check::new("determinism_golden_hash", "byte-identical reruns and hash == golden", 0.0)
        .metric("seed", system.seed)
        .metric("events", a.event_count())
        .metric("hash", &hash)
        .metric("identical_reruns", identical)
        .metric("jsonl_roundtrip", roundtrip);
    if let Some(g) = golden {
        c = c.metric("golden", g);
    }
    Ok(c.verdict(identical && roundtrip && golden_ok != Some(false)))
}

/// Residual of the fluid equation for `f` at `dt` and `dt/2`.
pub fn fluid_residual_check(system: &SystemConfig, dt: f64, tol: &Tolerances) -> Result<Check> {
    let f = TestFunction::exp(1.0);
    let params = FluidParams::from_config(system)?;
    let init = FluidInitial::from_config(system)?;
    let mut res = Vec::new();
    for h in [dt, dt / 2.0] {
        let opts = FluidOptions::new(h).with_functionals([f]);
        let st = initial_state::<f64>(&params, &init, &opts)?;
        res.push(fluid_residual(&params, &st, system.horizon, &opts, &f)?.max_abs);
    }
    let ratio = res[0] / res[1];
    let bound = tol.residual_factor * dt;
    Ok(Check::new("fluid_residual", "residual <= factor*dt and refinement ratio >= min ratio", bound)
        .metric("dt", dt)
        .metric("test_function", f.tag())
        .metric("residual", res[0])
        .metric("residual_half_dt", res[1])
        .metric("refinement_ratio", ratio)
        .metric("min_refinement_ratio", tol.refinement_ratio)
        .verdict(res[0] <= bound && ratio >= tol.refinement_ratio))
}

/// Single class, exponential patience: `z* = (α − Kμ)/γ` from outflow balance.
pub fn invariant_check(params: &FluidParams, horizon: f64) -> Result<Check> {
    let DistributionSpec::Exponential { rate: gamma } = params.patience[0] else {
        return Err(Error::Config("invariant check needs a single class with exponential patience".into()));
    };
    if params.classes() != 1 {
        return Err(Error::Config("invariant check needs a single class".into()));
    }
    let exact = (params.arrival_rates[0] - params.servers as f64 * params.service_rates[0]) / gamma;
    let opts = InvariantOptions::default();
    let inv = invariant_state::<f64>(params, &opts)?;
    let z = inv.z()[0];
    let fopts = FluidOptions::new(opts.dt);
    let path = fluid_solve(params, &inv, horizon, &fopts)?;
    let drift = path.z.iter().map(|v| (v[0] - z).abs()).fold(0.0, f64::max) / z;
    let err = (z - exact).abs();
    Ok(Check::new("invariant_stationarity", "|z - z*| <= tolerance and relative drift < 0.01", 1e-3)
        .metric("z_star", exact)
        .metric("invariant_z", z)
        .metric("abs_error", err)
        .metric("horizon", horizon)
        .metric("relative_drift", drift)
        .verdict(err <= 1e-3 && drift < 0.01))
}

/// One row of the convergence CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergeRow {
    pub m: u64,
    pub rep: usize,
    pub t: f64,
    pub class: usize,
    pub fluid_scaled: f64,
    pub fluid_model: f64,
}

/// Per-m median of `sup_t max_j |z̄^m_j − z_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeResult {
    pub checks: Vec<Check>,
    pub rows: Vec<ConvergeRow>,
}

pub fn converge(cfg: &ExperimentConfig, keep_rows: bool) -> Result<ConvergeResult> {
    cfg.require_overload()?;
    let system = &cfg.system;
    let init = FluidInitial::from_config(system)?;
    if init.masses.iter().all(|&m| m == 0.0) {
        return Err(Error::Precondition("convergence suite needs a nonzero initial state".into()));
    }
    let tol = &cfg.tolerances;
    let horizon = system.horizon;
    let path = fluid_path(system, cfg.fluid_dt, horizon, &[])?;
    let steps = (horizon / tol.converge_grid).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * tol.converge_grid).collect();
    let jn = system.classes;
    let model: Vec<Vec<f64>> =
        grid.iter().map(|&t| (0..jn).map(|j| path.functional(&TestFunction::Indicator, t, j)).collect()).collect::<Result<_>>()?;
    let zmax = model.iter().flatten().copied().fold(0.0, f64::max);
    let seed = suite_seed(cfg.master_seed, label::CONVERGE);
    let mut medians = Vec::new();
    let mut rows = Vec::new();
    for &m in &cfg.schedule.m_values {
        let sys = build_mth_system(system, m)?;
        let mf = m as f64;
        let paths = (0..cfg.schedule.replications)
            .into_par_iter()
            .map(|r| {
                let mut sink = NullSink;
                let mut sim = Simulation::new(&sys, replication_seed(seed, m, r as u64), &mut sink)?;
                let mut out = Vec::with_capacity(grid.len());
                for &t in &grid {
                    sim.advance_to(t * mf, &mut sink);
                    out.push(sim.queue_lengths().iter().map(|&q| q as f64 / mf).collect::<Vec<f64>>());
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sups: Vec<f64> = paths
            .iter()
            .map(|p| {
                p.iter().zip(&model).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
            })
            .collect();
        sups.sort_by(f64::total_cmp);
        let median = if sups.is_empty() {
            f64::NAN
        } else if sups.len() % 2 == 1 {
            sups[sups.len() / 2]
        } else {
            0.5 * (sups[sups.len() / 2 - 1] + sups[sups.len() / 2])
        };
        medians.push((m, median));
        if keep_rows {
            for (r, p) in paths.iter().enumerate() {
                for (i, &t) in grid.iter().enumerate() {
                    for j in 0..jn {
                        rows.push(ConvergeRow { m, rep: r, t, class: j, fluid_scaled: p[i][j], fluid_model: model[i][j] });
                    }
                }
            }
        }
    }
    // m = 1 carries no guarantee and is reported only.
    let judged: Vec<f64> = medians.iter().filter(|(m, _)| *m > 1).map(|(_, d)| *d).collect();
    let mut mono = Check::new("converge_monotone", "median sup-distance strictly decreasing in m (m > 1)", 0.0)
        .metric("medians", &medians)
        .metric("replications", cfg.schedule.replications)
        .metric("grid_step", tol.converge_grid);
    if judged.len() >= 2 {
        mono = mono.verdict(judged.windows(2).all(|w| w[1] < w[0]));
    }
    let (m_last, d_last) = *medians.last().expect("validated schedule is nonempty");
    let bound = tol.converge_fraction * zmax;
    let mut last = Check::new("converge_distance", "median sup-distance at largest m <= fraction * max z", bound)
        .metric("m", m_last)
        .metric("median_sup_distance", d_last)
        .metric("max_fluid_z", zmax)
        .metric("fraction", tol.converge_fraction);
    if m_last > 1 {
        last = last.verdict(d_last <= bound);
    }
    Ok(ConvergeResult { checks: vec![mono, last], rows })
}

pub fn write_converge_csv<W: Write>(mut w: W, rows: &[ConvergeRow]) -> Result<()> {
    writeln!(w, "m,rep,t,class,fluid_scaled,fluid_model")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.m, r.rep, r.t, r.class, r.fluid_scaled, r.fluid_model)?;
    }
    Ok(())
}

fn all_drivers(system: &SystemConfig) -> (Vec<Driver>, Vec<Driver>) {
    let arrivals = (0..system.classes).map(|class| Driver::Arrival { class }).collect();
    let services = (0..system.servers)
        .flat_map(|server| (0..system.classes).map(move |class| Driver::Service { server, class }))
        .collect();
    (arrivals, services)
}

/// Martingale values of every series of one log at `times`, in a fixed series order.
fn martingale_samples(
    log: &EventLog,
    fs: &[TestFunction],
    services: &[Driver],
    times: &[f64],
    variant: ArrivalVariant,
) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::new();
    for f in fs {
        for j in 0..log.config.classes {
            let s = arrival_decompose(log, f, j, variant)?;
            out.push((
                format!("{}:{}:target{}", s.driver.label(), f.tag(), s.target),
                times.iter().map(|&t| s.martingale_at(t)).collect(),
            ));
        }
        for s in service_decompose_all(log, f, services)? {
            out.push((
                format!("{}:{}:target{}", s.driver.label(), f.tag(), s.target),
                times.iter().map(|&t| s.martingale_at(t)).collect(),
            ));
        }
    }
    Ok(out)
}

/// Mean-zero tests for every (driver, f, target) martingale at the grid times.
///
/// The exact (all-busy indicator) arrival compensator is judged. For overloaded
/// systems the indicator-free variant is also reported, without a verdict.
pub fn martingale_nullity(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let tol = &cfg.tolerances;
    if tol.martingale_replications < MIN_REPLICATIONS {
        return Err(Error::Precondition(format!(
            "{} replications requested, at least {MIN_REPLICATIONS} required",
            tol.martingale_replications
        )));
    }
    let mut system = cfg.system.clone();
    let tmax = tol.martingale_times.iter().copied().fold(0.0, f64::max);
    system.horizon = system.horizon.max(tmax);
    let (_, services) = all_drivers(&system);
    let seed = suite_seed(cfg.master_seed, label::MARTINGALE);
    let overloaded = system.load()? > 1.0;
    let mut variants = vec![ArrivalVariant::Indicator];
    if overloaded {
        variants.push(ArrivalVariant::IndicatorFree);
    }
    let per_rep = (0..tol.martingale_replications)
        .into_par_iter()
        .map(|r| {
            let log = simulate(&system, replication_seed(seed, 1, r as u64))?;
            variants
                .iter()
                .map(|&v| martingale_samples(&log, &cfg.test_functions, &services, &tol.martingale_times, v))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    for (vi, &variant) in variants.iter().enumerate() {
        let series = per_rep.first().map_or(0, |r| r[vi].len());
        let mut pass = true;
        let mut reports = Vec::new();
        let mut worst = 0.0f64;
        let mut threshold = f64::NAN;
        for s in 0..series {
            let samples: Vec<Vec<f64>> = per_rep.iter().map(|r| r[vi][s].1.clone()).collect();
            let rep = martingale_zero_test_family(&samples, &tol.martingale_times, tol.martingale_level, series)?
                .with_label(per_rep[0][vi][s].0.clone());
            // Arrival series only differ between variants; service series are judged once.
            if variant == ArrivalVariant::IndicatorFree && !rep.label.starts_with("arrival") {
                continue;
            }
            pass &= rep.pass;
            threshold = rep.threshold;
            worst = rep.z_scores.iter().fold(worst, |a, z| a.max(z.abs()));
            reports.push(rep);
        }
        let name = match variant {
            ArrivalVariant::Indicator => "martingale_nullity",
            ArrivalVariant::IndicatorFree => "martingale_nullity_indicator_free",
        };
        let mut c = Check::new(name, "max |z| < Bonferroni threshold", threshold)
            .metric("replications", tol.martingale_replications)
            .metric("level", tol.martingale_level)
            .metric("series", series)
            .metric("max_abs_z", worst)
            .metric("failing", reports.iter().filter(|r| !r.pass).map(|r| r.label.clone()).collect::<Vec<_>>())
            .metric("tests", &reports);
        if variant == ArrivalVariant::Indicator {
            c = c.verdict(pass);
        }
        checks.push(c);
    }
    Ok(checks)
}

/// Replication-averaged realized against predictable QV at `qv_time` on the `qv_m` system.
pub fn qv_match(cfg: &ExperimentConfig) -> Result<Check> {
    let tol = &cfg.tolerances;
    if tol.qv_replications == 0 {
        return Err(Error::Precondition("QV comparison needs at least one replication".into()));
    }
    let mut base = cfg.system.clone();
    base.horizon = base.horizon.max(tol.qv_time);
    let m = tol.qv_m;
    let mf = m as f64;
    let system = build_mth_system(&base, m)?;
    let (arrivals, services) = all_drivers(&system);
    let mut series: Vec<(Driver, usize, TestFunction)> = Vec::new();
    for f in &cfg.test_functions {
        for &d in &arrivals {
            if let Driver::Arrival { class } = d {
                series.push((d, class, *f));
            }
        }
        for &d in &services {
            for i in 0..system.classes {
                series.push((d, i, *f));
            }
        }
    }
    let variant = ArrivalVariant::Indicator;
    let seed = suite_seed(cfg.master_seed, label::QV);
    let per_rep = (0..tol.qv_replications)
        .into_par_iter()
        .map(|r| {
            let log = simulate(&system, replication_seed(seed, m, r as u64))?;
            series
                .iter()
                .map(|(d, i, f)| {
                    let g = f.rescaled(mf);
                    let q = predictable_qv(&log, &g, &g, *d, (*i, *i), variant)?.scaled(mf);
                    Ok((q.predictable_at(tol.qv_time), q.realized_at(tol.qv_time)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut entries = Vec::new();
    for (s, (d, i, f)) in series.iter().enumerate() {
        let p = mean(&per_rep.iter().map(|r| r[s].0).collect::<Vec<_>>());
        let q = mean(&per_rep.iter().map(|r| r[s].1).collect::<Vec<_>>());
        let (rel, ok) = if p == 0.0 && q == 0.0 { (0.0, true) } else { (relative_error(q, p), relative_error(q, p) <= tol.qv_relative) };
        pass &= ok;
        worst = worst.max(rel);
        entries.push(serde_json::json!({
            "series": format!("{}:{}:target{}", d.label(), f.tag(), i),
            "predictable": p,
            "realized": q,
            "relative_error": rel,
            "pass": ok,
        }));
    }
    Ok(Check::new("qv_match", "relative error of averaged QVs <= tolerance", tol.qv_relative)
        .metric("m", m)
        .metric("t", tol.qv_time)
        .metric("replications", tol.qv_replications)
        .metric("max_relative_error", worst)
        .metric("series", entries)
        .verdict(pass))
}

fn constant_coefficients(drift: Matrix<f64>, channels: Vec<Matrix<f64>>) -> Result<SdeCoefficients<f64>> {
    let d = drift.rows();
    Ok(SdeCoefficients {
        observables: Observables::new(vec![1.0; d.div_ceil(2)], 1e-3)?,
        noise_form: NoiseForm::Stated,
        channels: channels.iter().map(|g| ChannelInfo { label: "W".into(), width: g.cols() }).collect(),
        nodes: vec![CoefficientNode { t: 0.0, drift, channels }],
    })
}

/// Matrix square roots on random PSD matrices, linear decay and a constant diffusion.
pub fn sde_calibration(tol: &Tolerances, master: u64) -> Result<Check> {
    let seed = suite_seed(master, label::CALIBRATION);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recon = 0.0f64;
    for trial in 0..50 {
        let rank = if trial % 3 == 0 { 3 } else { 6 };
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = Matrix::from_rows(&rows)?.gram();
        let s = psd_sqrt(&a)?;
        recon = recon.max(s.matmul(&s).max_abs_diff(&a));
    }
    let dt = tol.sde_dt.min(1e-3);
    let decay = constant_coefficients(Matrix::from_diag(&[-1.0, -1.0]), vec![Matrix::zeros(2, 1)])?;
    let opts = IntegrateOptions { dt, horizon: 1.0, paths: 1, seed, record: vec![] };
    let x = integrate(&decay, &InitialCondition::Fixed { value: vec![1.0, 1.0] }, &opts)?;
    let decay_err = (x.states[0][0][0] - (-1.0f64).exp()).abs();
    let sigma = 0.7;
    let horizon = 2.0;
    let noise = constant_coefficients(Matrix::zeros(2, 2), vec![Matrix::from_diag(&[sigma, 0.0])])?;
    let opts = IntegrateOptions { dt: tol.sde_dt, horizon, paths: tol.sde_paths, seed, record: vec![] };
    let v = summarize(&integrate(&noise, &InitialCondition::Zero, &opts)?.terminal(0)).variance;
    let var_err = relative_error(v, sigma * sigma * horizon);
    Ok(Check::new("sde_calibration", "sqrt reconstruction <= psd tol, decay error <= 2 dt, variance within 3%", tol.psd)
        .metric("max_reconstruction_error", recon)
        .metric("decay_dt", dt)
        .metric("decay_error", decay_err)
        .metric("paths", tol.sde_paths)
        .metric("variance", v)
        .metric("variance_target", sigma * sigma * horizon)
        .metric("variance_relative_error", var_err)
        .verdict(recon <= tol.psd && decay_err <= 2.0 * dt && var_err <= 0.03))
}

/// Symmetry and smallest eigenvalue of every D matrix along the fluid path.
pub fn d_sanity(cfg: &ExperimentConfig) -> Result<Check> {
    let system = &cfg.system;
    let fs = with_products(&cfg.test_functions);
    let path = fluid_path(system, cfg.fluid_dt, system.horizon, &fs)?;
    let params = FluidParams::from_config(system)?;
    let coords: Vec<(usize, TestFunction)> =
        (0..system.classes).flat_map(|i| cfg.test_functions.iter().map(move |f| (i, *f))).collect();
    let mut min_eig = f64::INFINITY;
    let mut asym = 0.0f64;
    let mut matrices = 0usize;
    for n in 0..path.len() {
        let view = path.at(n);
        for k in 0..system.servers {
            for j in 0..system.classes {
                let d = build_d(&params, &view, &coords, k, j)?;
                asym = asym.max(d.asymmetry());
                min_eig = min_eig.min(min_eigenvalue(&d)?);
                matrices += 1;
            }
        }
    }
    let tol = cfg.tolerances.psd;
    Ok(Check::new("d_matrix_sanity", "asymmetry <= tol and min eigenvalue >= -tol", tol)
        .metric("nodes", path.len())
        .metric("matrices", matrices)
        .metric("dimension", coords.len())
        .metric("max_asymmetry", asym)
        .metric("min_eigenvalue", min_eig)
        .verdict(asym <= tol && min_eig >= -tol))
}

/// Row of the diffusion CSV; `source` is `prelimit` or `sde` (with `m = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionRow {
    pub m: u64,
    pub rep: usize,
    pub t: f64,
    pub beta: f64,
    pub value: f64,
    pub source: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionResult {
    pub checks: Vec<Check>,
    /// Rows per class.
    pub rows: Vec<Vec<DiffusionRow>>,
}

/// Covariance of the centred, `√m`-scaled initial pairings for i.i.d. initial patience.
fn initial_gaussian(system: &SystemConfig, obs: &Observables) -> InitialCondition {
    let coords = obs.coordinates();
    let d = coords.len();
    let mut cov = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let ((ia, fa), (ib, fb)) = (coords[a], coords[b]);
            if ia != ib {
                continue;
            }
            if let InitialQueue::Drawn { mass, patience } = system.initial_queue(ia) {
                cov[a][b] = mass * (patience.pairing(&fa.product(&fb)) - patience.pairing(&fa) * patience.pairing(&fb));
            }
        }
    }
    InitialCondition::Gaussian { mean: vec![0.0; d], covariance: cov }
}

/// Prelimit `√m(⟨e^{−βx}, Z̄^m(t)⟩ − ⟨e^{−βx}, ξ(t)⟩)` against the SDE coordinate
/// `L^β`, for both noise forms. Advisory: checks carry no verdict.
pub fn diffusion_compare(cfg: &ExperimentConfig, keep_rows: bool) -> Result<DiffusionResult> {
    cfg.require_overload()?;
    if cfg.betas.is_empty() {
        return Err(Error::Config("diffusion comparison needs at least one beta".into()));
    }
    let tol = &cfg.tolerances;
    let system = &cfg.system;
    let jn = system.classes;
    let mut times = tol.diffusion_times.clone();
    times.sort_by(f64::total_cmp);
    let tmax = *times.last().ok_or_else(|| Error::Config("diffusion_times is empty".into()))?;
    let mut base = system.clone();
    base.horizon = base.horizon.max(tmax);
    let fs: Vec<TestFunction> = cfg.betas.iter().map(|&b| TestFunction::exp(b)).collect();
    let model = SdeModel::from_config(system)?;
    let mut required = fs.clone();
    for &beta in &cfg.betas {
        let obs = Observables::new(vec![beta; jn], tol.proxy_beta)?;
        required.extend(obs.required_functionals());
    }
    let path = fluid_path(system, cfg.fluid_dt, tmax, &required)?;
    let seed = suite_seed(cfg.master_seed, label::DIFFUSION);
    let mut rows: Vec<Vec<DiffusionRow>> = vec![Vec::new(); jn];

    // prelimit[m][rep][t][beta][class]
    let mut prelimit = Vec::new();
    for &m in &tol.diffusion_m {
        let sys = build_mth_system(&base, m)?;
        let mf = m as f64;
        let scaled: Vec<TestFunction> = fs.iter().map(|f| f.rescaled(mf)).collect();
        let samples = (0..tol.diffusion_replications)
            .into_par_iter()
            .map(|r| {
                let mut sink = NullSink;
                let mut sim = Simulation::new(&sys, replication_seed(seed, m, r as u64), &mut sink)?;
                times
                    .iter()
                    .map(|&t| {
                        sim.advance_to(t * mf, &mut sink);
                        fs.iter()
                            .zip(&scaled)
                            .map(|(f, g)| {
                                (0..jn)
                                    .map(|j| Ok(mf.sqrt() * (sim.pairing(g, j) / mf - path.functional(f, t, j)?)))
                                    .collect::<Result<Vec<f64>>>()
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if keep_rows {
            for (r, s) in samples.iter().enumerate() {
                for (ti, &t) in times.iter().enumerate() {
                    for (bi, &beta) in cfg.betas.iter().enumerate() {
                        for (j, out) in rows.iter_mut().enumerate() {
                            out.push(DiffusionRow { m, rep: r, t, beta, value: s[ti][bi][j], source: "prelimit" });
                        }
                    }
                }
            }
        }
        prelimit.push(samples);
    }

    let stride = ((tol.sde_dt / cfg.fluid_dt).round() as usize).max(1);
    let sde_dt = stride as f64 * cfg.fluid_dt;
    let mut checks = Vec::new();
    for form in [NoiseForm::Stated, NoiseForm::RenewalClt] {
        // sde[beta][t][class]
        let mut sde = Vec::new();
        for (bi, &beta) in cfg.betas.iter().enumerate() {
            let obs = Observables::new(vec![beta; jn], tol.proxy_beta)?;
            let coeffs = build_sde_coefficients(&model, &obs, &path, form, stride)?;
            let opts = IntegrateOptions {
                dt: sde_dt,
                horizon: tmax,
                paths: tol.sde_paths,
                seed: derive_seed(seed, &[label::SDE, bi as u64]),
                record: times.clone(),
            };
            let s = integrate(&coeffs, &initial_gaussian(system, &obs), &opts)?;
            let per_t: Vec<Vec<Vec<f64>>> = times
                .iter()
                .map(|&t| {
                    let r = s.times.iter().position(|&x| (x - t).abs() < 1e-9).expect("recorded time");
                    (0..jn).map(|j| s.coordinate(r, j)).collect()
                })
                .collect();
            if keep_rows && form == NoiseForm::Stated {
                for (ti, &t) in times.iter().enumerate() {
                    for (j, out) in rows.iter_mut().enumerate() {
                        for (p, &v) in per_t[ti][j].iter().enumerate() {
                            out.push(DiffusionRow { m: 0, rep: p, t, beta, value: v, source: "sde" });
                        }
                    }
                }
            }
            sde.push(per_t);
        }
        let mut entries = Vec::new();
        let mut all_within = true;
        let mut all_shrink = true;
        for (bi, &beta) in cfg.betas.iter().enumerate() {
            for (ti, &t) in times.iter().enumerate() {
                for j in 0..jn {
                    let sv = &sde[bi][ti][j];
                    let s_sum = summarize(sv);
                    let mut per_m = Vec::new();
                    let mut gaps = Vec::new();
                    for (mi, &m) in tol.diffusion_m.iter().enumerate() {
                        let pv: Vec<f64> = prelimit[mi].iter().map(|r| r[ti][bi][j]).collect();
                        let p_sum = summarize(&pv);
                        let ratio = p_sum.variance / s_sum.variance;
                        let gap = relative_error(p_sum.variance, s_sum.variance);
                        gaps.push(gap);
                        per_m.push(serde_json::json!({
                            "m": m,
                            "prelimit_mean": p_sum.mean,
                            "prelimit_variance": p_sum.variance,
                            "variance_ratio": ratio,
                            "relative_gap": gap,
                            "ks_distance": ks_statistic(&pv, sv),
                        }));
                    }
                    let within = gaps.last().is_some_and(|&g| g <= tol.diffusion_relative);
                    let shrink = (gaps.len() >= 2).then(|| gaps[gaps.len() - 1] < gaps[gaps.len() - 2]);
                    all_within &= within;
                    all_shrink &= shrink != Some(false);
                    let mut e = serde_json::json!({
                        "beta": beta,
                        "t": t,
                        "class": j,
                        "sde_mean": s_sum.mean,
                        "sde_variance": s_sum.variance,
                        "per_m": per_m,
                        "within_tolerance": within,
                    });
                    if let Some(s) = shrink {
                        e["trend"] = serde_json::json!(s);
                    }
                    entries.push(e);
                }
            }
        }
        let name = match form {
            NoiseForm::Stated => "diffusion_compare_stated",
            NoiseForm::RenewalClt => "diffusion_compare_renewal_clt",
        };
        let mut c = Check::new(
            name,
            "advisory: variance gap at largest m <= tolerance and gap shrinking in m",
            tol.diffusion_relative,
        )
        .metric("m_values", &tol.diffusion_m)
        .metric("replications", tol.diffusion_replications)
        .metric("sde_paths", tol.sde_paths)
        .metric("sde_dt", sde_dt)
        .metric("all_within_tolerance", all_within)
        .metric("comparisons", entries);
        if tol.diffusion_m.len() >= 2 {
            c = c.metric("trend", all_shrink);
        }
        checks.push(c);
    }
    Ok(DiffusionResult { checks, rows })
}

pub fn write_diffusion_csv<W: Write>(mut w: W, rows: &[DiffusionRow]) -> Result<()> {
    writeln!(w, "m,rep,t,beta,value,source")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.m, r.rep, r.t, r.beta, r.value, r.source)?;
    }
    Ok(())
}

/// Default single-class instance for the stationarity check.
pub fn invariant_reference() -> FluidParams {
    FluidParams {
        arrival_rates: vec![3.0],
        service_rates: vec![1.0],
        weights: vec![1.0],
        servers: 1,
        patience: vec![DistributionSpec::exponential(1.0)],
        arrival_start: vec![],
    }
}
