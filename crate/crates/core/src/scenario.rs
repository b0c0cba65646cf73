//! Scenario documents (TOML).
//!
//! ```toml
//! seed = 7
//! duration = 60.0
//! start_time = "10:00"
//! road_length = 2000.0
//!
//! [[zones]]
//! id = "office"
//! kind = "office"
//! start = 1000.0
//! end = 1200.0
//! limit = 45.0
//! schedule = { open = "09:00", close = "18:00" }
//!
//! [[vehicles]]
//! id = "v1"
//! position = 700.0
//! speed = 80.0
//! demand = 80.0
//!
//! [[commands]]
//! at = 30.0
//! action = "emergency"
//! zone = "office"
//! on = true
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::DEFAULT_SYSTEM_ADDRESS;
use crate::vehicle::{GearTable, Kinematics, SpeedLevels};
use crate::zone::{default_zones, prefix, LimitsTable, Schedule, TimeOfDay, ZoneController, ZoneError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<ZoneError> for ScenarioError {
    fn from(e: ZoneError) -> Self {
        match e {
            ZoneError::Validation { field, message } => ScenarioError::Invalid { field, message },
            ZoneError::UnknownZone(z) => ScenarioError::invalid("zone", format!("unknown zone {z:?}")),
        }
    }
}

/// An operator action, from a scenario's command list or the service API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ZoneCommand {
    SetSchedule { zone: String, schedule: Schedule },
    SetLimit { zone: String, limit: f64 },
    SetHonkFree { zone: String, honk_free: bool },
    Emergency { zone: String, on: bool },
}

impl ZoneCommand {
    pub fn zone(&self) -> &str {
        match self {
            ZoneCommand::SetSchedule { zone, .. }
            | ZoneCommand::SetLimit { zone, .. }
            | ZoneCommand::SetHonkFree { zone, .. }
            | ZoneCommand::Emergency { zone, .. } => zone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    /// Seconds after the run starts.
    pub at: f64,
    #[serde(flatten)]
    pub command: ZoneCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: String,
    pub position: f64,
    #[serde(default)]
    pub speed: f64,
    pub demand: f64,
    /// Defaults to the top gear.
    #[serde(default)]
    pub gear: Option<u8>,
    /// A vehicle without a governor never listens to zone beacons.
    #[serde(default = "yes")]
    pub governor: bool,
    /// `[from, to)` windows, in seconds after start, when the horn is pressed.
    #[serde(default)]
    pub horn: Vec<[f64; 2]>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub id: String,
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub bit_error_rate: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec { bit_error_rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Seconds of simulated time.
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub start_time: TimeOfDay,
    pub road_length: f64,
    #[serde(default = "default_address")]
    pub system_address: u8,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub limits: Option<LimitsTable>,
    #[serde(default)]
    pub kinematics: Option<Kinematics>,
    #[serde(default)]
    pub gears: Option<GearTable>,
    #[serde(default)]
    pub speed_levels: Option<SpeedLevels>,
    #[serde(default)]
    pub zones: Vec<crate::zone::ZoneConfig>,
    #[serde(default)]
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub commands: Vec<ScheduledCommand>,
}

fn default_seed() -> u64 {
    1
}

fn default_dt() -> f64 {
    0.1
}

fn default_address() -> u8 {
    DEFAULT_SYSTEM_ADDRESS
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Zone controller built from the zones and limits table. Without a
    /// table, each kind's limit comes from its zones.
    pub fn zone_controller(&self) -> Result<ZoneController, ScenarioError> {
        let limits = self.limits.clone().unwrap_or_else(|| {
            let mut t = LimitsTable::default();
            for z in &self.zones {
                t.set(z.kind, z.limit);
            }
            t
        });
        Ok(ZoneController::new(self.zones.clone(), limits)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ScenarioError::invalid(field, "must be positive"))
            }
        };
        positive("dt", self.dt)?;
        positive("road_length", self.road_length)?;
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(ScenarioError::invalid("duration", "must be non-negative"));
        }
        let ber = self.channel.bit_error_rate;
        if !(0.0..=1.0).contains(&ber) {
            return Err(ScenarioError::invalid(
                "channel.bit_error_rate",
                "must be within [0, 1]",
            ));
        }
        if let Some(k) = &self.kinematics {
            positive("kinematics.accel_max", k.accel_max)?;
            positive("kinematics.decel_max", k.decel_max)?;
            positive("kinematics.loss_timeout", k.loss_timeout)?;
            if !(k.obstacle_margin >= 0.0 && k.obstacle_hysteresis >= 0.0) {
                return Err(ScenarioError::invalid("kinematics", "margins must be non-negative"));
            }
        }
        if let Some(g) = &self.gears {
            GearTable::new((1..=g.gears()).map(|i| g.cap(i)).collect())?;
        }
        if let Some(l) = &self.speed_levels {
            SpeedLevels::new(l.levels().to_vec())?;
        }
        let ctl = self.zone_controller()?;
        for (i, z) in ctl.zones().iter().enumerate() {
            if z.start < 0.0 || z.end > self.road_length {
                return Err(ScenarioError::invalid(
                    format!("zones[{i}]"),
                    "interval must lie on the road",
                ));
            }
        }
        let gears = self.gears.clone().unwrap_or_default();
        let mut ids = BTreeSet::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            let at = |f: &str| format!("vehicles[{i}].{f}");
            if v.id.trim().is_empty() || !ids.insert(v.id.as_str()) {
                return Err(ScenarioError::invalid(at("id"), "must be unique and non-empty"));
            }
            if !(v.position.is_finite() && (0.0..=self.road_length).contains(&v.position)) {
                return Err(ScenarioError::invalid(at("position"), "must lie on the road"));
            }
            if !(v.speed.is_finite() && v.speed >= 0.0) {
                return Err(ScenarioError::invalid(at("speed"), "must be non-negative"));
            }
            if !(v.demand.is_finite() && v.demand >= 0.0) {
                return Err(ScenarioError::invalid(at("demand"), "must be non-negative"));
            }
            if let Some(g) = v.gear {
                if g == 0 || g > gears.gears() {
                    return Err(ScenarioError::invalid(
                        at("gear"),
                        format!("must be within 1..={}", gears.gears()),
                    ));
                }
            }
            if v.horn.iter().any(|[a, b]| !(a.is_finite() && b.is_finite() && a <= b)) {
                return Err(ScenarioError::invalid(
                    at("horn"),
                    "windows must be [from, to] with from <= to",
                ));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.id.trim().is_empty() || !ids.insert(o.id.as_str()) {
                return Err(ScenarioError::invalid(
                    format!("obstacles[{i}].id"),
                    "must be unique and non-empty",
                ));
            }
            if !(o.position.is_finite() && (0.0..=self.road_length).contains(&o.position)) {
                return Err(ScenarioError::invalid(
                    format!("obstacles[{i}].position"),
                    "must lie on the road",
                ));
            }
        }
        for (i, c) in self.commands.iter().enumerate() {
            let at = format!("commands[{i}]");
            if !(c.at.is_finite() && c.at >= 0.0) {
                return Err(ScenarioError::invalid(format!("{at}.at"), "must be non-negative"));
            }
            ctl.get(c.command.zone())
                .map_err(|_| ScenarioError::invalid(format!("{at}.zone"), "unknown zone"))?;
            if let ZoneCommand::SetLimit { limit, .. } = c.command {
                crate::zone::validate_limit(limit).map_err(|e| prefix(e, &at))?;
            }
        }
        Ok(())
    }
}

/// The three default zones on a 2 km road with one vehicle per lane slot.
pub fn default_scenario() -> Scenario {
    Scenario {
        seed: 1,
        duration: 120.0,
        dt: 0.1,
        start_time: TimeOfDay::hm(10, 0),
        road_length: 2200.0,
        system_address: DEFAULT_SYSTEM_ADDRESS,
        channel: ChannelSpec::default(),
        limits: None,
        kinematics: None,
        gears: None,
        speed_levels: None,
        zones: {
            let mut zones = default_zones();
            // distinct carriers so neighbouring transmitters never collide
            for (z, f) in zones.iter_mut().zip([433.92, 434.42, 434.92]) {
                z.frequency_mhz = f;
            }
            zones
        },
        vehicles: vec![
            VehicleSpec {
                id: "car-1".into(),
                position: 0.0,
                speed: 60.0,
                demand: 80.0,
                gear: None,
                governor: true,
                horn: vec![[20.0, 24.0], [80.0, 84.0]],
            },
            VehicleSpec {
                id: "car-2".into(),
                position: 150.0,
                speed: 60.0,
                demand: 100.0,
                gear: None,
                governor: true,
                horn: vec![[10.0, 12.0]],
            },
        ],
        obstacles: vec![],
        commands: vec![],
    }
}
