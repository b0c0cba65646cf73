//! Zone definitions, schedules and the transmitter-side broadcast decision.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Command, Payload, Symbol};

pub const SECONDS_PER_DAY: u32 = 86_400;
pub const DEFAULT_FREQUENCY_MHZ: f64 = 433.93;
pub const DEFAULT_REPEAT_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZoneError {
    #[error("unknown zone {0:?}")]
    UnknownZone(String),
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
}

impl ZoneError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ZoneError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    School,
    Office,
    Hospital,
}

impl ZoneKind {
    pub const ALL: [ZoneKind; 3] = [ZoneKind::School, ZoneKind::Office, ZoneKind::Hospital];

    pub fn as_str(self) -> &'static str {
        match self {
            ZoneKind::School => "school",
            ZoneKind::Office => "office",
            ZoneKind::Hospital => "hospital",
        }
    }

    pub fn active_symbol(self) -> Symbol {
        Symbol::for_zone(self, Command::Active)
    }

    pub fn release_symbol(self) -> Symbol {
        Symbol::for_zone(self, Command::Release)
    }
}

impl fmt::Display for ZoneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ZoneKind {
    type Err = ZoneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ZoneKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ZoneError::UnknownZone(s.to_string()))
    }
}

/// Seconds since midnight, always below [`SECONDS_PER_DAY`].
///
/// Text form is `HH:MM` or `HH:MM:SS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TimeOfDay(u32);

impl TimeOfDay {
    pub fn from_seconds(secs: u32) -> Result<Self, ZoneError> {
        if secs >= SECONDS_PER_DAY {
            return Err(ZoneError::invalid("time", format!("{secs} s is past midnight")));
        }
        Ok(TimeOfDay(secs))
    }

    pub fn hm(hours: u32, minutes: u32) -> Self {
        TimeOfDay((hours * 3600 + minutes * 60) % SECONDS_PER_DAY)
    }

    pub fn seconds(self) -> u32 {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (h, m, s) = (self.0 / 3600, self.0 / 60 % 60, self.0 % 60);
        if s == 0 {
            write!(f, "{h:02}:{m:02}")
        } else {
            write!(f, "{h:02}:{m:02}:{s:02}")
        }
    }
}

impl FromStr for TimeOfDay {
    type Err = ZoneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ZoneError::invalid("time", format!("{s:?} is not HH:MM or HH:MM:SS"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let mut nums = [0u32; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            if part.is_empty() || part.len() > 2 {
                return Err(bad());
            }
            *slot = part.parse().map_err(|_| bad())?;
        }
        let [h, m, sec] = nums;
        if h > 23 || m > 59 || sec > 59 {
            return Err(bad());
        }
        Ok(TimeOfDay(h * 3600 + m * 60 + sec))
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub open: TimeOfDay,
    #[serde(default)]
    pub close: TimeOfDay,
    #[serde(default)]
    pub always_on: bool,
}

impl Schedule {
    pub fn window(open: TimeOfDay, close: TimeOfDay) -> Self {
        Schedule {
            open,
            close,
            always_on: false,
        }
    }

    pub fn always() -> Self {
        Schedule {
            open: TimeOfDay::default(),
            close: TimeOfDay::default(),
            always_on: true,
        }
    }

    /// `open <= clock < close`, wrapping past midnight when `close < open`.
    /// An equal open and close time is an empty window.
    pub fn contains(&self, clock: f64) -> bool {
        if self.always_on {
            return true;
        }
        let clock = clock.rem_euclid(f64::from(SECONDS_PER_DAY));
        let (open, close) = (f64::from(self.open.0), f64::from(self.close.0));
        if open <= close {
            open <= clock && clock < close
        } else {
            clock >= open || clock < close
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub id: String,
    pub kind: ZoneKind,
    /// Road interval `[start, end]` in meters.
    pub start: f64,
    pub end: f64,
    #[serde(default = "default_frequency")]
    pub frequency_mhz: f64,
    pub schedule: Schedule,
    /// Speed limit in km/h.
    pub limit: f64,
    #[serde(default)]
    pub honk_free: bool,
    #[serde(default)]
    pub emergency: bool,
    /// Seconds between frame repeats.
    #[serde(default = "default_repeat_period")]
    pub repeat_period: f64,
    /// Radio range around the zone midpoint. Defaults to half the interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
}

fn default_frequency() -> f64 {
    DEFAULT_FREQUENCY_MHZ
}

fn default_repeat_period() -> f64 {
    DEFAULT_REPEAT_PERIOD
}

impl ZoneConfig {
    pub fn new(id: impl Into<String>, kind: ZoneKind, start: f64, end: f64, schedule: Schedule) -> Self {
        ZoneConfig {
            id: id.into(),
            kind,
            start,
            end,
            frequency_mhz: DEFAULT_FREQUENCY_MHZ,
            schedule,
            limit: LimitsTable::default().get(kind),
            honk_free: false,
            emergency: false,
            repeat_period: DEFAULT_REPEAT_PERIOD,
            range: None,
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.start + self.end) / 2.0
    }

    pub fn radio_range(&self) -> f64 {
        self.range.unwrap_or((self.end - self.start) / 2.0)
    }

    pub fn contains(&self, position: f64) -> bool {
        self.start <= position && position <= self.end
    }

    pub fn validate(&self) -> Result<(), ZoneError> {
        let finite = |field: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ZoneError::invalid(field, "must be a finite number"))
            }
        };
        if self.id.trim().is_empty() {
            return Err(ZoneError::invalid("id", "must not be empty"));
        }
        finite("start", self.start)?;
        finite("end", self.end)?;
        if self.start >= self.end {
            return Err(ZoneError::invalid("end", "must be greater than start"));
        }
        if !(self.frequency_mhz.is_finite() && self.frequency_mhz > 0.0) {
            return Err(ZoneError::invalid("frequency_mhz", "must be positive"));
        }
        validate_limit(self.limit)?;
        if !(self.repeat_period.is_finite() && self.repeat_period > 0.0) {
            return Err(ZoneError::invalid("repeat_period", "must be positive"));
        }
        if let Some(r) = self.range {
            if !(r.is_finite() && r > 0.0) {
                return Err(ZoneError::invalid("range", "must be positive"));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_limit(limit: f64) -> Result<(), ZoneError> {
    if limit.is_finite() && limit > 0.0 {
        Ok(())
    } else {
        Err(ZoneError::invalid("limit", "must be a positive speed in km/h"))
    }
}

pub fn zone_is_active(zone: &ZoneConfig, clock: f64) -> bool {
    zone.schedule.contains(clock)
}

/// What the zone's transmitter sends this tick, or `None` for silence.
pub fn broadcast_decision(zone: &ZoneConfig, clock: f64) -> Option<Payload> {
    if !zone_is_active(zone, clock) {
        return None;
    }
    let symbol = if zone.emergency {
        zone.kind.release_symbol()
    } else {
        zone.kind.active_symbol()
    };
    Some(Payload {
        symbol_index: symbol.index(),
        honk_free: zone.honk_free,
    })
}

/// Receiver-side speed limits keyed by zone kind, in km/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsTable(BTreeMap<ZoneKind, f64>);

impl Default for LimitsTable {
    fn default() -> Self {
        LimitsTable(BTreeMap::from([
            (ZoneKind::School, 45.0),
            (ZoneKind::Office, 45.0),
            (ZoneKind::Hospital, 25.0),
        ]))
    }
}

impl LimitsTable {
    pub fn empty() -> Self {
        LimitsTable(BTreeMap::new())
    }

    pub fn get(&self, kind: ZoneKind) -> f64 {
        self.0
            .get(&kind)
            .copied()
            .unwrap_or_else(|| LimitsTable::default().0[&kind])
    }

    pub fn lookup(&self, kind: ZoneKind) -> Option<f64> {
        self.0.get(&kind).copied()
    }

    pub fn set(&mut self, kind: ZoneKind, limit: f64) {
        self.0.insert(kind, limit);
    }
}

/// Limit a receiver applies for `kind`. Unknown kinds are rejected.
pub fn effective_limit(kind: &str, limits: &LimitsTable) -> Result<f64, ZoneError> {
    let kind: ZoneKind = kind.parse()?;
    limits
        .lookup(kind)
        .ok_or_else(|| ZoneError::UnknownZone(kind.to_string()))
}

/// One accepted operator mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigChange {
    pub zone_id: String,
    pub detail: String,
}

/// All zones plus the receiver limits table. Every mutation validates
/// before touching state, so a rejected change leaves nothing behind.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneController {
    zones: Vec<ZoneConfig>,
    limits: LimitsTable,
}

impl ZoneController {
    pub fn new(zones: Vec<ZoneConfig>, limits: LimitsTable) -> Result<Self, ZoneError> {
        let mut ctl = ZoneController {
            zones: Vec::new(),
            limits,
        };
        for kind in ZoneKind::ALL {
            if let Some(l) = ctl.limits.lookup(kind) {
                validate_limit(l)
                    .map_err(|_| ZoneError::invalid(format!("limits.{kind}"), "must be a positive speed in km/h"))?;
            }
        }
        for (i, z) in zones.into_iter().enumerate() {
            z.validate().map_err(|e| prefix(e, &format!("zones[{i}]")))?;
            if ctl.limits.lookup(z.kind).is_some_and(|l| l != z.limit) {
                return Err(ZoneError::invalid(
                    format!("zones[{i}].limit"),
                    format!("disagrees with limits.{}", z.kind),
                ));
            }
            if ctl.zones.iter().any(|o| o.id == z.id) {
                return Err(ZoneError::invalid(format!("zones[{i}].id"), "duplicate zone id"));
            }
            ctl.zones.push(z);
        }
        Ok(ctl)
    }

    pub fn zones(&self) -> &[ZoneConfig] {
        &self.zones
    }

    pub fn limits(&self) -> &LimitsTable {
        &self.limits
    }

    pub fn get(&self, id: &str) -> Result<&ZoneConfig, ZoneError> {
        self.zones
            .iter()
            .find(|z| z.id == id)
            .ok_or_else(|| ZoneError::UnknownZone(id.to_string()))
    }

    fn get_mut(&mut self, id: &str) -> Result<&mut ZoneConfig, ZoneError> {
        self.zones
            .iter_mut()
            .find(|z| z.id == id)
            .ok_or_else(|| ZoneError::UnknownZone(id.to_string()))
    }

    pub fn set_schedule(&mut self, id: &str, schedule: Schedule) -> Result<ConfigChange, ZoneError> {
        let zone = self.get_mut(id)?;
        zone.schedule = schedule;
        let detail = if schedule.always_on {
            "schedule=always".to_string()
        } else {
            format!("schedule={}-{}", schedule.open, schedule.close)
        };
        Ok(change(id, detail))
    }

    /// Sets the zone's limit. Receivers look limits up by kind, so the
    /// table entry and every zone of the same kind follow.
    pub fn set_limit(&mut self, id: &str, limit: f64) -> Result<ConfigChange, ZoneError> {
        validate_limit(limit)?;
        let kind = self.get(id)?.kind;
        for z in self.zones.iter_mut().filter(|z| z.kind == kind) {
            z.limit = limit;
        }
        self.limits.set(kind, limit);
        Ok(change(id, format!("limit={limit}")))
    }

    pub fn set_honk_free(&mut self, id: &str, honk_free: bool) -> Result<ConfigChange, ZoneError> {
        self.get_mut(id)?.honk_free = honk_free;
        Ok(change(id, format!("honk_free={honk_free}")))
    }

    pub fn trigger_emergency(&mut self, id: &str) -> Result<ConfigChange, ZoneError> {
        self.get_mut(id)?.emergency = true;
        Ok(change(id, "emergency=on".to_string()))
    }

    pub fn clear_emergency(&mut self, id: &str) -> Result<ConfigChange, ZoneError> {
        self.get_mut(id)?.emergency = false;
        Ok(change(id, "emergency=off".to_string()))
    }

    /// Replace every zone at once, e.g. after loading a config file.
    pub fn replace(&mut self, other: ZoneController) {
        *self = other;
    }
}

fn change(id: &str, detail: String) -> ConfigChange {
    ConfigChange {
        zone_id: id.to_string(),
        detail,
    }
}

pub(crate) fn prefix(err: ZoneError, path: &str) -> ZoneError {
    match err {
        ZoneError::Validation { field, message } => ZoneError::Validation {
            field: format!("{path}.{field}"),
            message,
        },
        other => other,
    }
}

/// The three-zone layout used by the demo, the service default and tests.
pub fn default_zones() -> Vec<ZoneConfig> {
    let mut school = ZoneConfig::new(
        "school",
        ZoneKind::School,
        400.0,
        600.0,
        Schedule::window(TimeOfDay::hm(8, 0), TimeOfDay::hm(17, 0)),
    );
    school.honk_free = true;
    let office = ZoneConfig::new(
        "office",
        ZoneKind::Office,
        1000.0,
        1200.0,
        Schedule::window(TimeOfDay::hm(9, 0), TimeOfDay::hm(18, 0)),
    );
    let mut hospital = ZoneConfig::new("hospital", ZoneKind::Hospital, 1600.0, 1800.0, Schedule::always());
    hospital.honk_free = true;
    vec![school, office, hospital]
}
