//! Discrete-time world: broadcast, propagate, validate, govern, move, log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{propagate, ChannelParams, Frequency, TransmitterSite};
use crate::codec::{decode_word, encode_frame, Codeword, ReceptionValidator, ValidTransmission, REQUIRED_MATCHES};
use crate::scenario::{Scenario, ScenarioError, ScheduledCommand, ZoneCommand};
use crate::trace::{Event, EventKind, EventLog, Metrics};
use crate::vehicle::{
    settle_time, GearTable, Governance, GovernanceChange, HaltChange, Kinematics, ReleaseReason, SpeedLevels,
    VehicleState,
};
use crate::zone::{broadcast_decision, zone_is_active, ConfigChange, ZoneConfig, ZoneController, ZoneError};

/// Speed tolerance above a limit before a sample counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 0.1;

/// True when `speed` exceeds `limit` by more than `tolerance`.
pub fn violation_check(speed: f64, limit: f64, tolerance: f64) -> bool {
    speed > limit + tolerance
}

#[derive(Debug, Clone)]
struct RxChannel {
    validator: ReceptionValidator,
    last_heard: f64,
}

/// Where a vehicle entered an active zone, for the violation grace window.
#[derive(Debug, Clone, Copy)]
struct ZoneEntry {
    at: f64,
    speed: f64,
}

#[derive(Debug, Clone)]
struct Vehicle {
    state: VehicleState,
    governor: bool,
    horn: Vec<[f64; 2]>,
    receivers: BTreeMap<Frequency, RxChannel>,
    entries: BTreeMap<String, ZoneEntry>,
    stop_reported: bool,
    rx: ReceptionStats,
}

/// Frames a receiver heard and how many of them were acted on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptionStats {
    pub frames_heard: u64,
    pub frames_valid: u64,
}

impl ReceptionStats {
    pub fn valid_rate(&self) -> f64 {
        if self.frames_heard == 0 {
            0.0
        } else {
            self.frames_valid as f64 / self.frames_heard as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneView {
    #[serde(flatten)]
    pub config: ZoneConfig,
    pub active: bool,
    /// Symbol the zone is broadcasting, if any.
    pub symbol: Option<char>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleView {
    #[serde(flatten)]
    pub state: VehicleState,
    pub governance: Governance,
    pub governor: bool,
    pub reception: ReceptionStats,
}

/// Immutable copy of the world handed to readers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    /// Seconds since midnight of the start day.
    pub clock: f64,
    pub time_of_day: String,
    pub road_length: f64,
    pub zones: Vec<ZoneView>,
    pub vehicles: Vec<VehicleView>,
    pub obstacles: Vec<Obstacle>,
    pub metrics: Metrics,
    pub events: usize,
}

#[derive(Debug, Clone)]
pub struct World {
    road_length: f64,
    dt: f64,
    start_clock: f64,
    tick: u64,
    system_address: u8,
    zones: ZoneController,
    channel: ChannelParams,
    kinematics: Kinematics,
    gears: GearTable,
    levels: SpeedLevels,
    vehicles: Vec<Vehicle>,
    obstacles: Vec<Obstacle>,
    pending: Vec<ScheduledCommand>,
    log: EventLog,
    metrics: Metrics,
}

impl World {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let gears = scenario.gears.clone().unwrap_or_default();
        let top = gears.gears();
        let vehicles = scenario
            .vehicles
            .iter()
            .map(|v| Vehicle {
                state: VehicleState::new(v.id.clone(), v.position, v.speed, v.demand, v.gear.unwrap_or(top)),
                governor: v.governor,
                horn: v.horn.clone(),
                receivers: BTreeMap::new(),
                entries: BTreeMap::new(),
                stop_reported: false,
                rx: ReceptionStats::default(),
            })
            .collect();
        let mut pending = scenario.commands.clone();
        pending.sort_by(|a, b| a.at.total_cmp(&b.at));
        Ok(World {
            road_length: scenario.road_length,
            dt: scenario.dt,
            start_clock: f64::from(scenario.start_time.seconds()),
            tick: 0,
            system_address: scenario.system_address,
            zones: scenario.zone_controller()?,
            channel: ChannelParams {
                bit_error_rate: scenario.channel.bit_error_rate,
                rng_seed: scenario.seed,
            },
            kinematics: scenario.kinematics.unwrap_or_default(),
            gears,
            levels: scenario.speed_levels.clone().unwrap_or_default(),
            vehicles,
            obstacles: scenario
                .obstacles
                .iter()
                .map(|o| Obstacle {
                    id: o.id.clone(),
                    position: o.position,
                })
                .collect(),
            pending,
            log: EventLog::default(),
            metrics: Metrics::default(),
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Seconds since the run started.
    pub fn elapsed(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    /// Seconds since midnight of the start day; exceeds a day on long runs.
    pub fn clock(&self) -> f64 {
        self.start_clock + self.elapsed()
    }

    pub fn zones(&self) -> &ZoneController {
        &self.zones
    }

    pub fn kinematics(&self) -> &Kinematics {
        &self.kinematics
    }

    pub fn vehicle(&self, id: &str) -> Option<&VehicleState> {
        self.vehicles.iter().map(|v| &v.state).find(|v| v.id == id)
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleState> {
        self.vehicles.iter().map(|v| &v.state)
    }

    pub fn reception_stats(&self, id: &str) -> Option<ReceptionStats> {
        self.vehicles.iter().find(|v| v.state.id == id).map(|v| v.rx)
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn set_horn(&mut self, vehicle: &str, pressed: bool) -> bool {
        match self.vehicles.iter_mut().find(|v| v.state.id == vehicle) {
            Some(v) => {
                v.state.horn_request = pressed;
                true
            }
            None => false,
        }
    }

    pub fn sites(&self) -> Vec<TransmitterSite> {
        self.zones.zones().iter().map(site_for).collect()
    }

    /// Apply an operator command now. It takes effect on the next tick and
    /// is logged as a `config_change` event.
    pub fn apply(&mut self, command: &ZoneCommand) -> Result<ZoneConfig, ZoneError> {
        let change = match command {
            ZoneCommand::SetSchedule { zone, schedule } => self.zones.set_schedule(zone, *schedule)?,
            ZoneCommand::SetLimit { zone, limit } => self.zones.set_limit(zone, *limit)?,
            ZoneCommand::SetHonkFree { zone, honk_free } => self.zones.set_honk_free(zone, *honk_free)?,
            ZoneCommand::Emergency { zone, on: true } => self.zones.trigger_emergency(zone)?,
            ZoneCommand::Emergency { zone, on: false } => self.zones.clear_emergency(zone)?,
        };
        let zone = self.zones.get(&change.zone_id)?.clone();
        self.record_change(change);
        Ok(zone)
    }

    /// Swap in a whole new zone set (config reload).
    pub fn replace_zones(&mut self, zones: ZoneController) {
        self.zones.replace(zones);
        for v in &mut self.vehicles {
            v.entries.clear();
        }
        self.record_change(ConfigChange {
            zone_id: "*".to_string(),
            detail: format!("reload zones={}", self.zones.zones().len()),
        });
    }

    fn record_change(&mut self, change: ConfigChange) {
        let e = Event::new(self.clock(), EventKind::ConfigChange, change.zone_id, change.detail);
        self.emit(e);
    }

    fn emit(&mut self, event: Event) {
        self.metrics.observe(&event);
        self.log.push(event);
    }

    pub fn snapshot(&self) -> Snapshot {
        let clock = self.clock();
        Snapshot {
            tick: self.tick,
            clock: crate::trace::round3(clock),
            time_of_day: format_clock(clock),
            road_length: self.road_length,
            zones: self
                .zones
                .zones()
                .iter()
                .map(|z| ZoneView {
                    config: z.clone(),
                    active: zone_is_active(z, clock),
                    symbol: broadcast_decision(z, clock)
                        .and_then(|p| p.symbol().ok())
                        .map(|s| s.as_char()),
                })
                .collect(),
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleView {
                    state: v.state.clone(),
                    governance: v.state.governance(),
                    governor: v.governor,
                    reception: v.rx,
                })
                .collect(),
            obstacles: self.obstacles.clone(),
            metrics: self.metrics.clone(),
            events: self.log.len(),
        }
    }

    /// Advance one tick and return the events it produced.
    pub fn step(&mut self) -> &[Event] {
        let first = self.log.len();
        let now = self.clock();
        let elapsed = self.elapsed();

        // operator commands due by now
        let due = self.pending.iter().take_while(|c| c.at <= elapsed + 1e-9).count();
        for cmd in self.pending.drain(..due).collect::<Vec<_>>() {
            // validated with the scenario; a failure here means the zone was replaced
            let _ = self.apply(&cmd.command);
        }

        // 1. broadcasts
        let mut sites = Vec::new();
        let mut tx_events = Vec::new();
        for zone in self.zones.zones() {
            let every = ((zone.repeat_period / self.dt).round() as u64).max(1);
            if !self.tick.is_multiple_of(every) {
                continue;
            }
            let Some(payload) = broadcast_decision(zone, now) else {
                continue;
            };
            let cw: Codeword =
                encode_frame(u16::from(self.system_address), payload.pack()).expect("payload packs into a nibble");
            let symbol = payload.symbol().map(|s| s.as_char()).unwrap_or('-');
            tx_events.push(Event::new(
                now,
                EventKind::Tx,
                zone.id.clone(),
                format!("frame={cw} symbol={symbol} honk_free={}", payload.honk_free),
            ));
            sites.push((site_for(zone), cw));
        }
        for e in tx_events {
            self.emit(e);
        }
        let active: Vec<(&TransmitterSite, Codeword)> = sites.iter().map(|(s, c)| (s, *c)).collect();

        // 2-3. propagate, decode, validate
        let mut receptions: Vec<Vec<ValidTransmission>> = Vec::with_capacity(self.vehicles.len());
        let mut events = Vec::new();
        for (idx, v) in self.vehicles.iter_mut().enumerate() {
            let mut valid = Vec::new();
            if v.governor {
                let heard = propagate(&active, v.state.position, &self.channel, self.tick, idx as u64);
                for rx in &heard {
                    let chan = v.receivers.entry(rx.frequency).or_insert_with(|| RxChannel {
                        validator: ReceptionValidator::new(self.system_address),
                        last_heard: now,
                    });
                    chan.last_heard = now;
                    v.rx.frames_heard += 1;
                    if let Some(vt) = chan.validator.push(decode_word(rx.word).ok(), now) {
                        if chan.validator.run_len() == REQUIRED_MATCHES {
                            let symbol = vt.payload.symbol().map(|s| s.as_char()).unwrap_or('-');
                            events.push(Event::new(
                                now,
                                EventKind::RxValid,
                                v.state.id.clone(),
                                format!(
                                    "freq={:.3} symbol={symbol} honk_free={}",
                                    rx.frequency.mhz(),
                                    vt.payload.honk_free
                                ),
                            ));
                        }
                        v.rx.frames_valid += 1;
                        valid.push(vt);
                    }
                }
                let timeout = self.kinematics.loss_timeout;
                for chan in v.receivers.values_mut() {
                    if now - chan.last_heard > timeout {
                        chan.validator.reset();
                    }
                }
            }
            receptions.push(valid);
        }
        for e in events.drain(..) {
            self.emit(e);
        }

        // 4. govern and move. Obstacle distances use positions from the start of the tick.
        let positions: Vec<(f64, usize)> = self
            .vehicles
            .iter()
            .enumerate()
            .map(|(i, v)| (v.state.position, i))
            .collect();
        let obstacle_positions: Vec<f64> = self.obstacles.iter().map(|o| o.position).collect();
        let limits = self.zones.limits().clone();
        let kin = self.kinematics;
        let end_time = now + self.dt;
        for (idx, (v, mut valid)) in self.vehicles.iter_mut().zip(receptions).enumerate() {
            let id = v.state.id.clone();
            // strictest rule applied last wins the tick
            valid.sort_by(|a, b| {
                let lim = |vt: &ValidTransmission| {
                    vt.payload
                        .symbol()
                        .map(|s| limits.get(s.zone_kind()))
                        .unwrap_or(f64::INFINITY)
                };
                lim(b).total_cmp(&lim(a))
            });
            let changes: Vec<GovernanceChange> = if valid.is_empty() {
                v.state
                    .apply_reception(None, now, &limits, kin.loss_timeout)
                    .into_iter()
                    .collect()
            } else {
                valid
                    .iter()
                    .filter_map(|vt| v.state.apply_reception(Some(vt), now, &limits, kin.loss_timeout))
                    .collect()
            };
            for c in changes {
                events.push(match c {
                    GovernanceChange::Governed(rule) => Event::new(
                        now,
                        EventKind::Governed,
                        id.clone(),
                        format!("zone={} limit={} honk_free={}", rule.kind, rule.limit, rule.honk_free),
                    ),
                    GovernanceChange::Released { kind, reason } => Event::new(
                        now,
                        EventKind::Released,
                        id.clone(),
                        format!(
                            "zone={kind} reason={}",
                            match reason {
                                ReleaseReason::Symbol => "release_symbol",
                                ReleaseReason::Timeout => "timeout",
                            }
                        ),
                    ),
                });
            }

            let me = v.state.position;
            let ahead = positions
                .iter()
                .filter(|&&(_, j)| j != idx)
                .map(|&(p, _)| p)
                .chain(obstacle_positions.iter().copied())
                .filter(|&p| p > me)
                .map(|p| p - me)
                .min_by(f64::total_cmp);
            match v.state.obstacle_guard(ahead, &kin, self.dt) {
                Some(HaltChange::Halted { distance }) => {
                    v.stop_reported = false;
                    events.push(Event::new(
                        now,
                        EventKind::Halted,
                        id.clone(),
                        format!("distance={distance:.3} speed={:.3}", v.state.speed),
                    ));
                }
                Some(HaltChange::Resumed) => {
                    events.push(Event::new(
                        now,
                        EventKind::Released,
                        id.clone(),
                        "reason=obstacle_cleared",
                    ));
                }
                None => {}
            }

            // scripted horn windows override; otherwise the request stays as set externally
            if !v.horn.is_empty() {
                v.state.horn_request = v.horn.iter().any(|[a, b]| *a <= elapsed && elapsed < *b);
            }
            v.state.step(self.dt, &kin, &self.gears, &self.levels);
            if v.state.horn_request && !v.state.horn_output {
                events.push(Event::new(now, EventKind::HornSuppressed, id.clone(), ""));
            }
            if v.state.halted && v.state.speed == 0.0 && !v.stop_reported {
                v.stop_reported = true;
                let gap = ahead.map_or("none".to_string(), |d| format!("{d:.3}"));
                events.push(Event::new(
                    now,
                    EventKind::CollisionAverted,
                    id.clone(),
                    format!("gap={gap}"),
                ));
            }

            // violation sampling against every active, non-emergency zone the vehicle is in
            let pos = v.state.position;
            let speed = v.state.speed;
            for zone in self.zones.zones() {
                let enforcing = zone_is_active(zone, end_time) && !zone.emergency && zone.contains(pos);
                if !enforcing {
                    v.entries.remove(&zone.id);
                    continue;
                }
                let entry = *v
                    .entries
                    .entry(zone.id.clone())
                    .or_insert(ZoneEntry { at: end_time, speed });
                let grace = zone.repeat_period * REQUIRED_MATCHES as f64
                    + self.dt
                    + settle_time(entry.speed, zone.limit, kin.decel_max);
                if end_time - entry.at >= grace - 1e-9 && violation_check(speed, zone.limit, VIOLATION_TOLERANCE) {
                    events.push(Event::new(
                        now,
                        EventKind::Violation,
                        id.clone(),
                        format!(
                            "zone={} speed={:.3} limit={} over={:.3}",
                            zone.id,
                            speed,
                            zone.limit,
                            speed - zone.limit
                        ),
                    ));
                }
            }
        }
        for e in events {
            self.emit(e);
        }

        self.tick += 1;
        &self.log.events()[first..]
    }

    /// Run `ticks` steps.
    pub fn run_ticks(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.step();
        }
    }

    pub fn road_length(&self) -> f64 {
        self.road_length
    }
}

fn site_for(zone: &ZoneConfig) -> TransmitterSite {
    TransmitterSite {
        zone_id: zone.id.clone(),
        position: zone.midpoint(),
        range: zone.radio_range(),
        frequency: Frequency::from_mhz(zone.frequency_mhz),
        repeat_period: zone.repeat_period,
    }
}

fn format_clock(clock: f64) -> String {
    let secs = clock.rem_euclid(86_400.0) as u32;
    format!("{:02}:{:02}:{:02}", secs / 3600, secs / 60 % 60, secs % 60)
}

/// Full result of a headless run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub events: Vec<Event>,
    pub metrics: Metrics,
    pub world: World,
}

impl RunOutput {
    pub fn trace_text(&self) -> String {
        crate::trace::format_trace(&self.events)
    }
}

/// Number of ticks covering `duration` seconds.
pub fn tick_count(duration: f64, dt: f64) -> u64 {
    (duration / dt - 1e-9).ceil().max(0.0) as u64
}

/// Run a scenario for `duration` seconds, or the scenario's own duration.
pub fn run_scenario(scenario: &Scenario, duration: Option<f64>) -> Result<RunOutput, ScenarioError> {
    let mut world = World::from_scenario(scenario)?;
    world.run_ticks(tick_count(duration.unwrap_or(scenario.duration), scenario.dt));
    Ok(RunOutput {
        events: world.log().events().to_vec(),
        metrics: world.metrics().clone(),
        world,
    })
}
