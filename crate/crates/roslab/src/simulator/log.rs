use super::config::SystemConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Initial,
    Arrival,
    Completion,
    Renege,
}

/// Job picked at a service completion; `rank` is 0-based in deadline order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub class: usize,
    pub rank: usize,
    pub remaining: f64,
}

/// One event with the noise it consumed and the pre-event queue lengths.
///
/// * `Initial`: a queued job (`patience` = remaining patience) or a busy server
///   (`server`, `service` = residual).
/// * `Arrival`: `patience` = w; if a server was idle, `server` and `service` = v.
/// * `Completion`: `class` finished at `server`; when a job was selected,
///   `choice` = κ, `selected`, and `service` = v of the entering job.
/// * `Renege`: the earliest deadline of `class` expired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<f64>,
    pub queue_lengths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_busy: Option<bool>,
}

impl EventRecord {
    /// Server that starts a new service at this event, with the entering class and draw.
    pub fn service_entry(&self) -> Option<(usize, usize, f64)> {
        match self.kind {
            EventKind::Initial | EventKind::Arrival => {
                Some((self.server?, self.class, self.service?))
            }
            EventKind::Completion => {
                let sel = self.selected?;
                Some((self.server?, sel.class, self.service?))
            }
            EventKind::Renege => None,
        }
    }
}

/// Receives events as the simulator produces them.
pub trait EventSink {
    /// When false the simulator skips building records.
    fn wants_records(&self) -> bool {
        true
    }
    fn record(&mut self, rec: EventRecord);
}

impl EventSink for Vec<EventRecord> {
    fn record(&mut self, rec: EventRecord) {
        self.push(rec);
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EventSink for NullSink {
    fn wants_records(&self) -> bool {
        false
    }
    fn record(&mut self, _rec: EventRecord) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogHeader {
    config: SystemConfig,
    seed: u64,
}

/// Complete, immutable record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub config: SystemConfig,
    pub seed: u64,
    pub records: Vec<EventRecord>,
}

impl EventLog {
    /// Number of non-initial events.
    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.kind != EventKind::Initial).count()
    }

    /// JSON lines: a header with the config, then one record per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = LogHeader { config: self.config.clone(), seed: self.seed };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Integrity("empty log file".into()))??;
        let header: LogHeader =
            serde_json::from_str(&first).map_err(|e| Error::Integrity(format!("bad log header: {e}")))?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line).map_err(|e| Error::Integrity(format!("bad record {i}: {e}")))?,
            );
        }
        Ok(EventLog { config: header.config, seed: header.seed, records })
    }

    /// SHA-256 of the JSON-lines serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl()))
    }
}
