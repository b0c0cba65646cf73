//! Receiver-side speed governor.
//!
//! Speeds are km/h, distances meters, times seconds, accelerations m/s².

use serde::{Deserialize, Serialize};

use crate::codec::{Command, ValidTransmission};
use crate::zone::{LimitsTable, ZoneError, ZoneKind};

const KMH_PER_MPS: f64 = 3.6;

/// Speed cap per gear, gear 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GearTable(Vec<f64>);

impl Default for GearTable {
    fn default() -> Self {
        GearTable(vec![15.0, 30.0, 60.0, 120.0])
    }
}

impl GearTable {
    pub fn new(caps: Vec<f64>) -> Result<Self, ZoneError> {
        if caps.is_empty() {
            return Err(ZoneError::invalid("gears", "needs at least one gear"));
        }
        if caps.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(ZoneError::invalid("gears", "caps must be positive"));
        }
        if caps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ZoneError::invalid("gears", "caps must be strictly increasing"));
        }
        Ok(GearTable(caps))
    }

    pub fn gears(&self) -> u8 {
        self.0.len() as u8
    }

    /// Cap for a 1-based gear. Out-of-range gears clamp to the table ends.
    pub fn cap(&self, gear: u8) -> f64 {
        let i = usize::from(gear.max(1)) - 1;
        self.0[i.min(self.0.len() - 1)]
    }
}

/// Discrete speeds the drive can hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeedLevels(Vec<f64>);

impl Default for SpeedLevels {
    fn default() -> Self {
        SpeedLevels(vec![0.0, 15.0, 25.0, 45.0, 60.0, 80.0, 100.0, 120.0])
    }
}

impl SpeedLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self, ZoneError> {
        if levels.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(ZoneError::invalid("speed_levels", "levels must be non-negative"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ZoneError::invalid("speed_levels", "levels must be sorted and unique"));
        }
        if levels.first() != Some(&0.0) {
            return Err(ZoneError::invalid("speed_levels", "levels must contain 0"));
        }
        Ok(SpeedLevels(levels))
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    /// Largest level not above `target`.
    pub fn quantize(&self, target: f64) -> f64 {
        self.0.iter().rev().find(|&&l| l <= target).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub accel_max: f64,
    pub decel_max: f64,
    /// Silence after which a governed vehicle considers itself out of zone.
    pub loss_timeout: f64,
    /// Added to the stopping distance to get the obstacle threshold.
    pub obstacle_margin: f64,
    pub obstacle_hysteresis: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Kinematics {
            accel_max: 3.0,
            decel_max: 5.0,
            loss_timeout: 1.0,
            obstacle_margin: 2.0,
            obstacle_hysteresis: 1.0,
        }
    }
}

/// Stopping distance in meters from `speed_kmh` at constant `decel` m/s².
pub fn stopping_distance(speed_kmh: f64, decel: f64) -> f64 {
    let v = speed_kmh / KMH_PER_MPS;
    v * v / (2.0 * decel)
}

/// Distance at which the obstacle sensor halts the vehicle: stopping
/// distance plus margin, plus the ground one tick can cover at the fastest
/// speed reachable by the end of that tick.
pub fn obstacle_threshold(speed_kmh: f64, kin: &Kinematics, dt: f64) -> f64 {
    let reach = speed_kmh / KMH_PER_MPS + kin.accel_max * dt;
    stopping_distance(speed_kmh, kin.decel_max) + kin.obstacle_margin + reach * dt
}

/// Time to slow from `from_kmh` to `to_kmh` at `decel` m/s².
pub fn settle_time(from_kmh: f64, to_kmh: f64, decel: f64) -> f64 {
    ((from_kmh - to_kmh) / KMH_PER_MPS / decel).max(0.0)
}

/// The restriction a zone imposes once its beacon is validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneRule {
    pub kind: ZoneKind,
    pub limit: f64,
    pub honk_free: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Governance {
    Free,
    Governed(ZoneRule),
    Halted,
}

pub fn governed_target(
    driver_demand: f64,
    gear: u8,
    governance: &Governance,
    gears: &GearTable,
    levels: &SpeedLevels,
) -> f64 {
    let target = match governance {
        Governance::Halted => return 0.0,
        Governance::Free => driver_demand.min(gears.cap(gear)),
        Governance::Governed(rule) => driver_demand.min(gears.cap(gear)).min(rule.limit),
    };
    levels.quantize(target.max(0.0))
}

/// Horn output after masking in honk-free zones.
pub fn horn_output(horn_request: bool, zone: Option<&ZoneRule>) -> bool {
    horn_request && !zone.is_some_and(|r| r.honk_free)
}

/// Dashboard mirror: zone text and current speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Display {
    pub zone: String,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReleaseReason {
    Symbol,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GovernanceChange {
    Governed(ZoneRule),
    Released { kind: ZoneKind, reason: ReleaseReason },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HaltChange {
    Halted { distance: f64 },
    Resumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: String,
    pub position: f64,
    pub speed: f64,
    pub driver_demand: f64,
    pub gear: u8,
    pub horn_request: bool,
    pub horn_output: bool,
    /// Zone restriction currently in force, kept while halted.
    pub zone: Option<ZoneRule>,
    pub halted: bool,
    pub last_valid_rx: Option<f64>,
    /// When the current zone rule took effect.
    pub governed_since: Option<f64>,
    pub display: Display,
}

impl VehicleState {
    pub fn new(id: impl Into<String>, position: f64, speed: f64, driver_demand: f64, gear: u8) -> Self {
        let mut v = VehicleState {
            id: id.into(),
            position,
            speed,
            driver_demand,
            gear,
            horn_request: false,
            horn_output: false,
            zone: None,
            halted: false,
            last_valid_rx: None,
            governed_since: None,
            display: Display {
                zone: String::new(),
                speed,
            },
        };
        v.refresh_display();
        v
    }

    pub fn governance(&self) -> Governance {
        match (self.halted, self.zone) {
            (true, _) => Governance::Halted,
            (false, Some(rule)) => Governance::Governed(rule),
            (false, None) => Governance::Free,
        }
    }

    /// Act on this tick's validated reception, or its absence.
    pub fn apply_reception(
        &mut self,
        rx: Option<&ValidTransmission>,
        now: f64,
        limits: &LimitsTable,
        loss_timeout: f64,
    ) -> Option<GovernanceChange> {
        let Some(rx) = rx else {
            let stale = self.last_valid_rx.is_none_or(|t| now - t > loss_timeout);
            return match self.zone {
                Some(rule) if stale => {
                    self.zone = None;
                    self.governed_since = None;
                    Some(GovernanceChange::Released {
                        kind: rule.kind,
                        reason: ReleaseReason::Timeout,
                    })
                }
                _ => None,
            };
        };
        // Idle or unassigned indices carry no command.
        let symbol = rx.payload.symbol().ok()?;
        let kind = symbol.zone_kind();
        match symbol.command() {
            Command::Active => {
                self.last_valid_rx = Some(now);
                let rule = ZoneRule {
                    kind,
                    limit: limits.get(kind),
                    honk_free: rx.payload.honk_free,
                };
                if self.zone == Some(rule) {
                    return None;
                }
                self.zone = Some(rule);
                self.governed_since = Some(now);
                Some(GovernanceChange::Governed(rule))
            }
            Command::Release => match self.zone {
                Some(rule) if rule.kind == kind => {
                    self.zone = None;
                    self.governed_since = None;
                    self.last_valid_rx = Some(now);
                    Some(GovernanceChange::Released {
                        kind,
                        reason: ReleaseReason::Symbol,
                    })
                }
                _ => None,
            },
        }
    }

    /// Halt when the obstacle ahead is within [`obstacle_threshold`]; resume
    /// once it is clear of that threshold by the hysteresis.
    pub fn obstacle_guard(&mut self, distance_ahead: Option<f64>, kin: &Kinematics, dt: f64) -> Option<HaltChange> {
        let threshold = obstacle_threshold(self.speed, kin, dt);
        if self.halted {
            let clear = distance_ahead.is_none_or(|d| d > threshold + kin.obstacle_hysteresis);
            if clear {
                self.halted = false;
                return Some(HaltChange::Resumed);
            }
        } else if let Some(d) = distance_ahead.filter(|&d| d <= threshold) {
            self.halted = true;
            return Some(HaltChange::Halted { distance: d });
        }
        None
    }

    /// Advance one tick: slew toward the governed target, then move.
    pub fn step(&mut self, dt: f64, kin: &Kinematics, gears: &GearTable, levels: &SpeedLevels) {
        let target = governed_target(self.driver_demand, self.gear, &self.governance(), gears, levels);
        let up = kin.accel_max * KMH_PER_MPS * dt;
        let down = kin.decel_max * KMH_PER_MPS * dt;
        self.speed = if self.speed < target {
            (self.speed + up).min(target)
        } else {
            (self.speed - down).max(target)
        };
        self.position += self.speed / KMH_PER_MPS * dt;
        self.horn_output = horn_output(self.horn_request, self.zone.as_ref());
        self.refresh_display();
    }

    fn refresh_display(&mut self) {
        self.display = Display {
            zone: match self.governance() {
                Governance::Free => "FREE".to_string(),
                Governance::Halted => "HALT".to_string(),
                Governance::Governed(r) => {
                    format!("{} {}", r.kind.as_str().to_uppercase(), r.limit)
                }
            },
            speed: self.speed,
        };
    }
}
