//! Reconstruct queue measures from an event log, checking every record.

use super::log::{EventKind, EventLog, EventRecord};
use super::queue::{QueueEntry, QueueMeasure};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Replay {
    queues: Vec<QueueMeasure>,
    clock: f64,
    seq: u64,
    applied: usize,
}

fn integrity<T>(i: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Integrity(format!("record {i}: {}", msg.into())))
}

impl Replay {
    pub fn new(classes: usize) -> Self {
        Replay { queues: vec![QueueMeasure::new(); classes], clock: 0.0, seq: 0, applied: 0 }
    }

    pub fn queues(&self) -> &[QueueMeasure] {
        &self.queues
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(|q| q.len()).collect()
    }

    fn enqueue(&mut self, class: usize, deadline: f64) {
        self.queues[class].insert(QueueEntry { deadline, seq: self.seq });
        self.seq += 1;
    }

    /// Apply one record after checking it against the current state.
    pub fn apply(&mut self, rec: &EventRecord) -> Result<()> {
        let i = self.applied;
        if !(rec.time >= self.clock) {
            return integrity(i, format!("time {} precedes clock {}", rec.time, self.clock));
        }
        if rec.class >= self.queues.len() {
            return integrity(i, format!("unknown class {}", rec.class));
        }
        if rec.queue_lengths.len() != self.queues.len()
            || rec.queue_lengths.iter().zip(&self.queues).any(|(&n, q)| n != q.len())
        {
            return integrity(
                i,
                format!("pre-event queue lengths {:?} differ from replay {:?}", rec.queue_lengths, self.queue_lengths()),
            );
        }
        self.clock = rec.time;
        match rec.kind {
            EventKind::Initial => {
                if rec.server.is_none() {
                    let Some(w) = rec.patience else { return integrity(i, "initial job without patience") };
                    self.enqueue(rec.class, rec.time + w);
                }
            }
            EventKind::Arrival => {
                let Some(w) = rec.patience else { return integrity(i, "arrival without patience") };
                match rec.all_busy {
                    Some(true) => {
                        if rec.server.is_some() {
                            return integrity(i, "queued arrival also entered service");
                        }
                        self.enqueue(rec.class, rec.time + w);
                    }
                    Some(false) => {
                        if rec.server.is_none() || rec.service.is_none() {
                            return integrity(i, "bypassing arrival without a server");
                        }
                    }
                    None => return integrity(i, "arrival without busy flag"),
                }
            }
            EventKind::Completion => {
                if let Some(sel) = rec.selected {
                    if sel.class >= self.queues.len() {
                        return integrity(i, format!("selected unknown class {}", sel.class));
                    }
                    let Some(entry) = self.queues[sel.class].remove_rank(sel.rank) else {
                        return integrity(i, format!("rank {} missing from class {}", sel.rank, sel.class));
                    };
                    if entry.deadline - rec.time != sel.remaining {
                        return integrity(i, "selected job's remaining patience does not match");
                    }
                } else if self.queues.iter().any(|q| !q.is_empty()) {
                    return integrity(i, "server idled while jobs were waiting");
                }
            }
            EventKind::Renege => {
                let Some(e) = self.queues[rec.class].pop_min() else {
                    return integrity(i, "renege from an empty queue");
                };
                if e.deadline != rec.time {
                    return integrity(i, format!("renege at {} but earliest deadline is {}", rec.time, e.deadline));
                }
            }
        }
        self.applied += 1;
        Ok(())
    }

    /// Replay a whole log.
    pub fn run(log: &EventLog) -> Result<Replay> {
        let mut r = Replay::new(log.config.classes);
        for rec in &log.records {
            r.apply(rec)?;
        }
        Ok(r)
    }
}
