//! Event loop of the prelimit system.

use super::config::{InitialQueue, InitialServer, SystemConfig};
use super::log::{EventKind, EventLog, EventRecord, EventSink, Selection};
use super::queue::{QueueEntry, QueueMeasure};
use crate::error::{Error, Result};
use crate::primitives::{substream, Sampler, StreamKind, StreamRng};
use crate::testfn::TestFunction;
use rand::Rng;
use rand_distr::Distribution;

/// Locate `u` in the choice intervals `I_{l,m}(z)`. Returns `(class, rank)`, both 0-based.
pub fn select_job(z: &[usize], p: &[f64], u: f64) -> Result<(usize, usize)> {
    let total: f64 = z.iter().zip(p).map(|(&n, &w)| n as f64 * w).sum();
    if total <= 0.0 {
        return Err(Error::Precondition("cannot select from an empty system".into()));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Precondition(format!("choosing variable {u} outside [0, 1)")));
    }
    let x = u * total;
    let last = z.iter().rposition(|&n| n > 0).expect("total > 0");
    let mut acc = 0.0;
    for (l, (&n, &w)) in z.iter().zip(p).enumerate() {
        if n == 0 {
            continue;
        }
        let width = n as f64 * w;
        if x < acc + width || l == last {
            let rank = (((x - acc) / w).floor().max(0.0) as usize).min(n - 1);
            return Ok((l, rank));
        }
        acc += width;
    }
    unreachable!("last nonempty class always matches")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyServer {
    pub class: usize,
    pub completion: f64,
    pub draw: f64,
    pub initial: bool,
}

struct Source {
    sampler: Sampler,
    rng: StreamRng,
}

impl Source {
    fn new(spec: &crate::primitives::DistributionSpec, seed: u64, kind: StreamKind, a: usize, b: usize) -> Self {
        Source { sampler: spec.sampler(), rng: substream(seed, kind, a as u64, b as u64) }
    }

    fn draw(&mut self) -> f64 {
        self.sampler.sample(&mut self.rng)
    }
}

#[derive(Clone, Copy)]
enum Next {
    Renege(usize),
    Completion(usize),
    Arrival(usize),
}

/// A running simulation. Advance it with [`Simulation::advance_to`] and inspect
/// the queues between steps.
pub struct Simulation {
    weights: Vec<f64>,
    horizon: f64,
    clock: f64,
    seq: u64,
    queues: Vec<QueueMeasure>,
    servers: Vec<Option<BusyServer>>,
    next_arrival: Vec<f64>,
    interarrival: Vec<Source>,
    patience: Vec<Source>,
    service: Vec<Vec<Source>>,
    choosing: Vec<Vec<StreamRng>>,
}

impl Simulation {
    /// Validate, draw the initial state and report it to `sink`.
    pub fn new<S: EventSink>(cfg: &SystemConfig, seed: u64, sink: &mut S) -> Result<Self> {
        cfg.validate()?;
        let (jn, kn) = (cfg.classes, cfg.servers);
        let mut interarrival: Vec<Source> = (0..jn)
            .map(|j| Source::new(&cfg.interarrival[j], seed, StreamKind::Interarrival, j, 0))
            .collect();
        let next_arrival = (0..jn)
            .map(|j| match cfg.first_arrival(j) {
                Some(d) => Source::new(d, seed, StreamKind::FirstArrival, j, 0).draw(),
                None => interarrival[j].draw(),
            })
            .collect();
        let mut sim = Simulation {
            weights: cfg.weights.clone(),
            horizon: cfg.horizon,
            clock: 0.0,
            seq: 0,
            queues: vec![QueueMeasure::new(); jn],
            servers: vec![None; kn],
            next_arrival,
            interarrival,
            patience: (0..jn).map(|j| Source::new(&cfg.patience[j], seed, StreamKind::Patience, j, 0)).collect(),
            service: (0..kn)
                .map(|k| (0..jn).map(|j| Source::new(cfg.service.get(k, j), seed, StreamKind::Service, k, j)).collect())
                .collect(),
            choosing: (0..kn)
                .map(|k| (0..jn).map(|j| substream(seed, StreamKind::Choosing, k as u64, j as u64)).collect())
                .collect(),
        };
        let record = sink.wants_records();
        for k in 0..kn {
            if let InitialServer::Busy { residual, class } = cfg.initial_server(k) {
                let draw = Source::new(residual, seed, StreamKind::InitialService, k, 0).draw();
                sim.servers[k] = Some(BusyServer { class: *class, completion: draw, draw, initial: true });
                if record {
                    let mut rec = sim.blank(EventKind::Initial, *class);
                    rec.server = Some(k);
                    rec.service = Some(draw);
                    sink.record(rec);
                }
            }
        }
        for j in 0..jn {
            let remaining: Vec<f64> = match cfg.initial_queue(j) {
                InitialQueue::Explicit { remaining } => remaining,
                InitialQueue::Drawn { mass, patience } => {
                    let mut src = Source::new(&patience, seed, StreamKind::InitialPatience, j, 0);
                    (0..mass.round() as usize).map(|_| src.draw()).collect()
                }
            };
            for w in remaining {
                if record {
                    let mut rec = sim.blank(EventKind::Initial, j);
                    rec.patience = Some(w);
                    sink.record(rec);
                }
                sim.enqueue(j, w);
            }
        }
        Ok(sim)
    }

    fn blank(&self, kind: EventKind, class: usize) -> EventRecord {
        EventRecord {
            time: self.clock,
            kind,
            class,
            server: None,
            patience: None,
            service: None,
            choice: None,
            queue_lengths: self.queue_lengths(),
            selected: None,
            all_busy: None,
        }
    }

    fn enqueue(&mut self, class: usize, patience: f64) {
        let entry = QueueEntry { deadline: self.clock + patience, seq: self.seq };
        self.seq += 1;
        self.queues[class].insert(entry);
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn queues(&self) -> &[QueueMeasure] {
        &self.queues
    }

    pub fn servers(&self) -> &[Option<BusyServer>] {
        &self.servers
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(|q| q.len()).collect()
    }

    /// `⟨f, Z_j(clock)⟩`.
    pub fn pairing(&self, f: &TestFunction, class: usize) -> f64 {
        self.queues[class].pairing(self.clock, |x| f.eval(x))
    }

    fn next_event(&self) -> Option<(f64, Next)> {
        let mut best: Option<(f64, u8, usize, Next)> = None;
        let mut offer = |t: f64, rank: u8, idx: usize, ev: Next| {
            let better = match best {
                None => true,
                Some((bt, br, bi, _)) => (t, rank, idx) < (bt, br, bi),
            };
            if better {
                best = Some((t, rank, idx, ev));
            }
        };
        for (j, q) in self.queues.iter().enumerate() {
            if let Some(e) = q.min() {
                offer(e.deadline, 0, j, Next::Renege(j));
            }
        }
        for (k, s) in self.servers.iter().enumerate() {
            if let Some(b) = s {
                offer(b.completion, 1, k, Next::Completion(k));
            }
        }
        for (j, &t) in self.next_arrival.iter().enumerate() {
            offer(t, 2, j, Next::Arrival(j));
        }
        best.map(|(t, _, _, ev)| (t, ev))
    }

    /// Process one event if it occurs no later than `until` (and the horizon).
    pub fn step<S: EventSink>(&mut self, until: f64, sink: &mut S) -> bool {
        let limit = until.min(self.horizon);
        let Some((t, ev)) = self.next_event() else { return false };
        if t > limit {
            return false;
        }
        self.clock = t;
        let record = sink.wants_records();
        match ev {
            Next::Renege(j) => {
                let rec = record.then(|| self.blank(EventKind::Renege, j));
                self.queues[j].pop_min();
                if let Some(rec) = rec {
                    sink.record(rec);
                }
            }
            Next::Arrival(j) => self.arrive(j, record, sink),
            Next::Completion(k) => self.complete(k, record, sink),
        }
        true
    }

    fn arrive<S: EventSink>(&mut self, j: usize, record: bool, sink: &mut S) {
        let mut rec = record.then(|| self.blank(EventKind::Arrival, j));
        let w = self.patience[j].draw();
        let gap = self.interarrival[j].draw();
        self.next_arrival[j] = self.clock + gap;
        let idle = self.servers.iter().position(|s| s.is_none());
        match idle {
            Some(k) => {
                let v = self.service[k][j].draw();
                self.servers[k] = Some(BusyServer { class: j, completion: self.clock + v, draw: v, initial: false });
                if let Some(r) = rec.as_mut() {
                    r.server = Some(k);
                    r.service = Some(v);
                }
            }
            None => self.enqueue(j, w),
        }
        if let Some(mut r) = rec {
            r.patience = Some(w);
            r.all_busy = Some(idle.is_none());
            sink.record(r);
        }
    }

    fn complete<S: EventSink>(&mut self, k: usize, record: bool, sink: &mut S) {
        let done = self.servers[k].take().expect("completion on a busy server");
        let mut rec = record.then(|| {
            let mut r = self.blank(EventKind::Completion, done.class);
            r.server = Some(k);
            r
        });
        let z = self.queue_lengths();
        if z.iter().any(|&n| n > 0) {
            let u: f64 = self.choosing[k][done.class].random();
            let (l, rank) = select_job(&z, &self.weights, u).expect("nonempty queues");
            let entry = self.queues[l].remove_rank(rank).expect("rank within queue");
            let v = self.service[k][l].draw();
            self.servers[k] = Some(BusyServer { class: l, completion: self.clock + v, draw: v, initial: false });
            if let Some(r) = rec.as_mut() {
                r.choice = Some(u);
                r.selected = Some(Selection { class: l, rank, remaining: entry.deadline - self.clock });
                r.service = Some(v);
            }
        }
        if let Some(r) = rec {
            sink.record(r);
        }
    }

    /// Process every event with time ≤ `t` (capped at the horizon); the clock ends at `t`.
    pub fn advance_to<S: EventSink>(&mut self, t: f64, sink: &mut S) {
        while self.step(t, sink) {}
        self.clock = self.clock.max(t.min(self.horizon));
    }

    pub fn run<S: EventSink>(&mut self, sink: &mut S) {
        self.advance_to(self.horizon, sink);
    }
}

/// Run `cfg` to its horizon with master seed `seed` and collect the log.
pub fn simulate(cfg: &SystemConfig, seed: u64) -> Result<EventLog> {
    let mut records = Vec::new();
    let mut sim = Simulation::new(cfg, seed, &mut records)?;
    sim.run(&mut records);
    Ok(EventLog { config: cfg.clone(), seed, records })
}
