use serde::{Deserialize, Serialize};

use super::series::{DecomposedSeries, Driver, QvSeries, StepSeries};
use crate::error::{config, Result};
use crate::simulator::{EventKind, EventLog, EventRecord, QueueMeasure, Replay};
use crate::testfn::TestFunction;

/// Whether the arrival compensator keeps the all-servers-busy indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalVariant {
    #[default]
    Indicator,
    IndicatorFree,
}

fn arrival_weight(rec: &EventRecord, variant: ArrivalVariant) -> f64 {
    match variant {
        ArrivalVariant::IndicatorFree => 1.0,
        ArrivalVariant::Indicator => {
            if rec.all_busy == Some(true) {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn check_class(log: &EventLog, class: usize) -> Result<()> {
    if class >= log.config.classes {
        return config(format!("class {class} out of range"));
    }
    Ok(())
}

fn check_driver(log: &EventLog, driver: Driver) -> Result<()> {
    match driver {
        Driver::Arrival { class } => check_class(log, class),
        Driver::Service { server, class } => {
            if server >= log.config.servers {
                return config(format!("server {server} out of range"));
            }
            check_class(log, class)
        }
    }
}

/// Arrivals of class `j` acting on the class-`j` queue measure.
pub fn arrival_decompose(
    log: &EventLog,
    f: &TestFunction,
    class: usize,
    variant: ArrivalVariant,
) -> Result<DecomposedSeries> {
    check_class(log, class)?;
    let mean_f = log.config.patience[class].pairing(f);
    let mut out = DecomposedSeries::new(Driver::Arrival { class }, class, *f);
    for rec in &log.records {
        if rec.kind != EventKind::Arrival || rec.class != class {
            continue;
        }
        let Some(w) = rec.patience else { continue };
        let b = arrival_weight(rec, variant);
        out.push(rec.time, b * f.eval(w), b * mean_f);
    }
    Ok(out)
}

/// Pre-completion quantities shared by every target class.
struct CompletionState {
    total: f64,
    pairings: Vec<f64>,
}

fn completion_state(queues: &[QueueMeasure], weights: &[f64], now: f64, f: &TestFunction) -> Option<CompletionState> {
    let total: f64 = queues.iter().zip(weights).map(|(q, p)| p * q.len() as f64).sum();
    if queues.iter().all(|q| q.is_empty()) {
        return None;
    }
    let pairings = queues.iter().map(|q| q.pairing(now, |x| f.eval(x))).collect();
    Some(CompletionState { total, pairings })
}

fn is_driver_completion(rec: &EventRecord, server: usize, class: usize) -> bool {
    rec.kind == EventKind::Completion && rec.server == Some(server) && rec.class == class
}

/// Completions of class `class` at `server` acting on the class-`target` queue measure.
///
/// The compensator is `H = −Σ φ`, with `φ = p_i ⟨f, Z_i⟩ / L` at the pre-event state,
/// so that `Δ = Y + H`.
pub fn service_decompose(
    log: &EventLog,
    f: &TestFunction,
    target: usize,
    server: usize,
    class: usize,
) -> Result<DecomposedSeries> {
    check_class(log, target)?;
    check_driver(log, Driver::Service { server, class })?;
    let mut all = service_decompose_all(log, f, &[Driver::Service { server, class }])?;
    Ok(all.swap_remove(target))
}

/// Service decompositions for every target class and each listed service driver,
/// from a single replay. Output is ordered driver-major, then target class.
pub fn service_decompose_all(log: &EventLog, f: &TestFunction, drivers: &[Driver]) -> Result<Vec<DecomposedSeries>> {
    let classes = log.config.classes;
    let mut keys = Vec::with_capacity(drivers.len());
    for &d in drivers {
        check_driver(log, d)?;
        match d {
            Driver::Service { server, class } => keys.push((server, class)),
            Driver::Arrival { .. } => return config("arrival driver passed to a service decomposition"),
        }
    }
    let mut out: Vec<DecomposedSeries> = drivers
        .iter()
        .flat_map(|&d| (0..classes).map(move |i| DecomposedSeries::new(d, i, *f)))
        .collect();
    let weights = &log.config.weights;
    let mut replay = Replay::new(classes);
    for rec in &log.records {
        if rec.kind == EventKind::Completion {
            for (slot, &(k, j)) in keys.iter().enumerate() {
                if !is_driver_completion(rec, k, j) {
                    continue;
                }
                let state = completion_state(replay.queues(), weights, rec.time, f);
                for i in 0..classes {
                    let (d_delta, phi) = match (&state, rec.selected) {
                        (Some(s), Some(sel)) => {
                            let d = if sel.class == i { -f.eval(sel.remaining) } else { 0.0 };
                            (d, weights[i] * s.pairings[i] / s.total)
                        }
                        _ => (0.0, 0.0),
                    };
                    out[slot * classes + i].push(rec.time, d_delta, -phi);
                }
            }
        }
        replay.apply(rec)?;
    }
    Ok(out)
}

/// Predictable and realized covariation of `Y_{f_a}` on class `targets.0` and
/// `Y_{f_b}` on class `targets.1` for one driver.
pub fn predictable_qv(
    log: &EventLog,
    f_a: &TestFunction,
    f_b: &TestFunction,
    driver: Driver,
    targets: (usize, usize),
    variant: ArrivalVariant,
) -> Result<QvSeries> {
    check_driver(log, driver)?;
    check_class(log, targets.0)?;
    check_class(log, targets.1)?;
    let (ia, ib) = targets;
    let mut times = Vec::new();
    let mut predictable = Vec::new();
    let mut realized = Vec::new();
    let (mut pq, mut rq) = (0.0, 0.0);
    match driver {
        Driver::Arrival { class } => {
            let law = &log.config.patience[class];
            let (ma, mb, mab) = (law.pairing(f_a), law.pairing(f_b), law.pairing(&f_a.product(f_b)));
            for rec in &log.records {
                if rec.kind != EventKind::Arrival || rec.class != class {
                    continue;
                }
                let Some(w) = rec.patience else { continue };
                let b = arrival_weight(rec, variant);
                let ya = if ia == class { b * (f_a.eval(w) - ma) } else { 0.0 };
                let yb = if ib == class { b * (f_b.eval(w) - mb) } else { 0.0 };
                if ia == class && ib == class {
                    pq += b * (mab - ma * mb);
                }
                rq += ya * yb;
                times.push(rec.time);
                predictable.push(pq);
                realized.push(rq);
            }
        }
        Driver::Service { server, class } => {
            let weights = &log.config.weights;
            let fab = f_a.product(f_b);
            let mut replay = Replay::new(log.config.classes);
            for rec in &log.records {
                if is_driver_completion(rec, server, class) {
                    let q = replay.queues();
                    if let (Some(sel), false) = (rec.selected, q.iter().all(|x| x.is_empty())) {
                        let total: f64 = q.iter().zip(weights).map(|(z, p)| p * z.len() as f64).sum();
                        let now = rec.time;
                        let phi = |f: &TestFunction, i: usize| weights[i] * q[i].pairing(now, |x| f.eval(x)) / total;
                        let (pa, pb) = (phi(f_a, ia), phi(f_b, ib));
                        if ia == ib {
                            pq += phi(&fab, ia);
                        }
                        pq -= pa * pb;
                        let ya = pa - if sel.class == ia { f_a.eval(sel.remaining) } else { 0.0 };
                        let yb = pb - if sel.class == ib { f_b.eval(sel.remaining) } else { 0.0 };
                        rq += ya * yb;
                    }
                    times.push(rec.time);
                    predictable.push(pq);
                    realized.push(rq);
                }
                replay.apply(rec)?;
            }
        }
    }
    Ok(QvSeries { driver, targets, f_a: *f_a, f_b: *f_b, times, predictable, realized })
}

/// Service-entry error of server `k` on class `j`: `(1/β)(1 − β v)` while the
/// service that started at a non-initial entry of class `j` is in progress, else 0.
pub fn epsilon_term(log: &EventLog, server: usize, class: usize) -> Result<StepSeries> {
    check_driver(log, Driver::Service { server, class })?;
    let beta = 1.0 / log.config.service.get(server, class).mean();
    let mut out = StepSeries { times: Vec::new(), values: Vec::new() };
    let mut push = |t: f64, v: f64| {
        out.times.push(t);
        out.values.push(v);
    };
    for rec in &log.records {
        match rec.service_entry() {
            Some((k, j, v)) if k == server => {
                let value = if j == class && rec.kind != EventKind::Initial { (1.0 - beta * v) / beta } else { 0.0 };
                push(rec.time, value);
            }
            _ => {
                if rec.kind == EventKind::Completion && rec.server == Some(server) {
                    push(rec.time, 0.0);
                }
            }
        }
    }
    Ok(out)
}
