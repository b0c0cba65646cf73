//! Append-only event log, its line format, and metrics derived from it.
//!
//! One event per line, tab separated: `time kind subject detail`. Time is
//! seconds since midnight of the start day with three decimals. Detail is a
//! space-separated list of `key=value` pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A zone transmitter sent a frame.
    Tx,
    RxValid,
    Governed,
    Released,
    Halted,
    HornSuppressed,
    Violation,
    CollisionAverted,
    ConfigChange,
}

impl EventKind {
    pub const ALL: [EventKind; 9] = [
        EventKind::Tx,
        EventKind::RxValid,
        EventKind::Governed,
        EventKind::Released,
        EventKind::Halted,
        EventKind::HornSuppressed,
        EventKind::Violation,
        EventKind::CollisionAverted,
        EventKind::ConfigChange,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Tx => "tx",
            EventKind::RxValid => "rx_valid",
            EventKind::Governed => "governed",
            EventKind::Released => "released",
            EventKind::Halted => "halted",
            EventKind::HornSuppressed => "horn_suppressed",
            EventKind::Violation => "violation",
            EventKind::CollisionAverted => "collision_averted",
            EventKind::ConfigChange => "config_change",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| TraceError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: expected 4 tab-separated fields")]
    Fields { line: usize },
    #[error("line {line}: bad time {value:?}")]
    Time { line: usize, value: String },
    #[error("unknown event kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub subject: String,
    pub detail: String,
}

impl Event {
    pub fn new(time: f64, kind: EventKind, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        Event {
            time: round3(time),
            kind,
            subject: subject.into(),
            detail: detail.into(),
        }
    }

    /// Look up a `key=value` pair in the detail field.
    pub fn field(&self, key: &str) -> Option<&str> {
        self.detail
            .split(' ')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    pub fn to_line(&self) -> String {
        format!("{:.3}\t{}\t{}\t{}", self.time, self.kind, self.subject, self.detail)
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, TraceError> {
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        let [time, kind, subject, detail] = fields[..] else {
            return Err(TraceError::Fields { line: line_no });
        };
        let time = time.parse::<f64>().map_err(|_| TraceError::Time {
            line: line_no,
            value: time.to_string(),
        })?;
        Ok(Event {
            time,
            kind: kind.parse()?,
            subject: subject.to_string(),
            detail: detail.to_string(),
        })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// Round to the precision the trace text carries, so in-memory values and
/// values parsed back from a trace file are the same `f64`.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

pub fn format_trace(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<Event>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| Event::parse_line(l, i + 1))
        .collect()
}

/// Append-only, time-ordered log.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, event: Event) {
        debug_assert!(self.events.last().is_none_or(|l| l.time <= event.time));
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn since(&self, index: usize) -> &[Event] {
        &self.events[index.min(self.events.len())..]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub violations: u64,
    /// Mean of `speed - limit` over violation samples, km/h.
    pub mean_overspeed: f64,
    pub suppressed_honks: u64,
    pub halts: u64,
    pub collisions_averted: u64,
    pub frames_sent: u64,
    pub valid_transmissions: u64,
    pub governed: u64,
    pub released: u64,
    pub config_changes: u64,
    #[serde(skip)]
    overspeed_sum: f64,
}

impl Metrics {
    pub fn observe(&mut self, event: &Event) {
        match event.kind {
            EventKind::Tx => self.frames_sent += 1,
            EventKind::RxValid => self.valid_transmissions += 1,
            EventKind::Governed => self.governed += 1,
            EventKind::Released => self.released += 1,
            EventKind::Halted => self.halts += 1,
            EventKind::HornSuppressed => self.suppressed_honks += 1,
            EventKind::CollisionAverted => self.collisions_averted += 1,
            EventKind::ConfigChange => self.config_changes += 1,
            EventKind::Violation => {
                self.violations += 1;
                let over = event.field("over").and_then(|v| v.parse::<f64>().ok()).unwrap_or(0.0);
                self.overspeed_sum += over;
                self.mean_overspeed = self.overspeed_sum / self.violations as f64;
            }
        }
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut m = Metrics::default();
        for e in events {
            m.observe(e);
        }
        m
    }

    pub fn summary(&self) -> String {
        format!(
            "violations={} mean_overspeed={:.3} suppressed_honks={} halts={} collisions_averted={} \
             frames_sent={} valid_transmissions={} governed={} released={} config_changes={}",
            self.violations,
            self.mean_overspeed,
            self.suppressed_honks,
            self.halts,
            self.collisions_averted,
            self.frames_sent,
            self.valid_transmissions,
            self.governed,
            self.released,
            self.config_changes,
        )
    }
}
