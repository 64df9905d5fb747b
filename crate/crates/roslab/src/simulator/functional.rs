//! Path functionals and bookkeeping derived from logs.

use super::log::{EventKind, EventLog};
use super::replay::Replay;
use crate::error::{domain, Result};
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Per-class values on a time grid: `values[class][i]` belongs to `grid[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSeries {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl PathSeries {
    /// CSV rows `t,class,value,functional_tag`, classes 0-based.
    pub fn write_csv<W: Write>(&self, mut w: W, tag: &str, header: bool) -> Result<()> {
        if header {
            writeln!(w, "t,class,value,functional_tag")?;
        }
        for (i, t) in self.grid.iter().enumerate() {
            for (j, v) in self.values.iter().enumerate() {
                writeln!(w, "{t},{j},{},{tag}", v[i])?;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_grid(grid: &[f64], horizon: f64) -> Result<()> {
    if let Some(&t) = grid.iter().find(|&&t| !(t >= 0.0 && t <= horizon)) {
        return domain(format!("grid point {t} outside [0, {horizon}]"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return domain("grid must be nondecreasing");
    }
    Ok(())
}

/// Replay `log` and evaluate `g(remaining, t)` summed over each class's queue at
/// every grid time.
pub(crate) fn replay_on_grid(
    log: &EventLog,
    grid: &[f64],
    horizon: f64,
    g: impl Fn(f64, f64) -> f64,
) -> Result<PathSeries> {
    check_grid(grid, horizon)?;
    let j = log.config.classes;
    let mut replay = Replay::new(j);
    let mut values = vec![Vec::with_capacity(grid.len()); j];
    let mut next = 0;
    for &t in grid {
        while next < log.records.len() && log.records[next].time <= t {
            replay.apply(&log.records[next])?;
            next += 1;
        }
        for (c, q) in replay.queues().iter().enumerate() {
            values[c].push(q.iter().fold(0.0, |acc, e| acc + g(e.deadline - t, t)));
        }
    }
    Ok(PathSeries { grid: grid.to_vec(), values })
}

/// `⟨f, Z_j(t)⟩ = Σ f(deadline − t)` per class on `grid`.
pub fn path_functional(log: &EventLog, f: &TestFunction, grid: &[f64]) -> Result<PathSeries> {
    replay_on_grid(log, grid, log.config.horizon, |x, _| f.eval(x))
}

/// `g_j^k(t)`: time server `k` spent on class `j` during `[0, t]`.
pub fn time_change(log: &EventLog, k: usize, j: usize, t: f64) -> f64 {
    busy_intervals(log, k)
        .into_iter()
        .filter(|iv| iv.class == j)
        .map(|iv| (iv.end.min(t) - iv.start).max(0.0))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyInterval {
    pub class: usize,
    pub start: f64,
    /// Planned completion (may lie beyond the horizon).
    pub end: f64,
}

/// Service periods of server `k` in order.
pub fn busy_intervals(log: &EventLog, k: usize) -> Vec<BusyInterval> {
    let mut out = Vec::new();
    for r in &log.records {
        if let Some((s, class, v)) = r.service_entry() {
            if s == k {
                let start = r.time;
                // Initial residuals are stored in `service` and end at `0 + residual`.
                out.push(BusyInterval { class, start, end: start + v });
            }
        }
    }
    out
}

/// Smallest and largest value over the run of service entries minus completions,
/// per `(server, class)`. Both lie in `{0, 1}` for a consistent log.
pub fn entry_completion_gap(log: &EventLog) -> (i64, i64) {
    let (kn, jn) = (log.config.servers, log.config.classes);
    let mut diff = vec![vec![0i64; jn]; kn];
    let (mut lo, mut hi) = (0, 0);
    for r in &log.records {
        if r.kind == EventKind::Completion {
            let k = r.server.expect("completion has a server");
            diff[k][r.class] -= 1;
            lo = lo.min(diff[k][r.class]);
        }
        if let Some((k, j, _)) = r.service_entry() {
            diff[k][j] += 1;
            hi = hi.max(diff[k][j]);
        }
    }
    (lo, hi)
}
