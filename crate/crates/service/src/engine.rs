//! The simulation task. It owns the [`World`]; everything else talks to it
//! through [`EngineHandle`] and reads published snapshots.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::Instant;
use zonegov::config_file;
use zonegov::scenario::ZoneCommand;
use zonegov::zone::Schedule;
use zonegov::{Event, EventKind, Scenario, Snapshot, World, ZoneConfig, ZoneError};

use crate::hub::EventHub;

/// Largest speed multiplier accepted.
pub const MAX_SPEED: f64 = 1000.0;
/// Ticks the engine will run back to back to catch up after a stall.
const MAX_CATCH_UP: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Paused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    BadRequest,
    NotFound,
    Conflict,
    Internal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>, field: Option<String>) -> Self {
        ApiError {
            kind: ErrorKind::BadRequest,
            message: message.into(),
            field,
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        ApiError {
            kind: ErrorKind::Conflict,
            message: message.into(),
            field: None,
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError {
            kind: ErrorKind::Internal,
            message: message.into(),
            field: None,
        }
    }
}

impl From<ZoneError> for ApiError {
    fn from(e: ZoneError) -> Self {
        match e {
            ZoneError::UnknownZone(id) => ApiError {
                kind: ErrorKind::NotFound,
                message: format!("unknown zone {id:?}"),
                field: None,
            },
            ZoneError::Validation { field, message } => ApiError::bad_request(message, Some(field)),
        }
    }
}

/// Body of `PUT /zones/{id}`; absent fields are left alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZonePatch {
    pub schedule: Option<Schedule>,
    pub limit: Option<f64>,
    pub honk_free: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimAction {
    Start,
    Pause,
    Step {
        #[serde(default = "one")]
        ticks: u64,
    },
    Speed {
        multiplier: f64,
    },
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigAction {
    Save,
    Reload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStatus {
    pub run_state: RunState,
    pub speed: f64,
    pub tick: u64,
    pub clock: f64,
}

/// What readers see: the world snapshot plus session state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSnapshot {
    pub run_state: RunState,
    pub speed: f64,
    #[serde(flatten)]
    pub world: Snapshot,
}

type Reply<T> = oneshot::Sender<Result<T, ApiError>>;

enum Request {
    UpdateZone {
        id: String,
        patch: ZonePatch,
        reply: Reply<ZoneConfig>,
    },
    Emergency {
        id: String,
        on: bool,
        reply: Reply<ZoneConfig>,
    },
    Sim {
        action: SimAction,
        reply: Reply<SimStatus>,
    },
    LoadScenario {
        scenario: Box<Scenario>,
        reply: Reply<SimStatus>,
    },
    Config {
        action: ConfigAction,
        reply: Reply<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct EngineHandle {
    requests: mpsc::Sender<Request>,
    snapshots: watch::Receiver<Arc<ServiceSnapshot>>,
    hub: EventHub,
}

impl EngineHandle {
    pub fn snapshot(&self) -> Arc<ServiceSnapshot> {
        self.snapshots.borrow().clone()
    }

    pub fn hub(&self) -> &EventHub {
        &self.hub
    }

    async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Request) -> Result<T, ApiError> {
        let (tx, rx) = oneshot::channel();
        self.requests
            .send(make(tx))
            .await
            .map_err(|_| ApiError::internal("simulation stopped"))?;
        rx.await.map_err(|_| ApiError::internal("simulation stopped"))?
    }

    pub async fn update_zone(&self, id: String, patch: ZonePatch) -> Result<ZoneConfig, ApiError> {
        self.call(|reply| Request::UpdateZone { id, patch, reply }).await
    }

    pub async fn emergency(&self, id: String, on: bool) -> Result<ZoneConfig, ApiError> {
        self.call(|reply| Request::Emergency { id, on, reply }).await
    }

    pub async fn sim(&self, action: SimAction) -> Result<SimStatus, ApiError> {
        self.call(|reply| Request::Sim { action, reply }).await
    }

    pub async fn load_scenario(&self, scenario: Scenario) -> Result<SimStatus, ApiError> {
        self.call(|reply| Request::LoadScenario {
            scenario: Box::new(scenario),
            reply,
        })
        .await
    }

    pub async fn config(&self, action: ConfigAction) -> Result<usize, ApiError> {
        self.call(|reply| Request::Config { action, reply }).await
    }
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub scenario: Scenario,
    pub config_path: Option<PathBuf>,
    pub speed: f64,
    pub start_running: bool,
    pub stream_capacity: usize,
}

struct Engine {
    world: World,
    published: usize,
    run_state: RunState,
    speed: f64,
    config_path: Option<PathBuf>,
    hub: EventHub,
    snapshots: watch::Sender<Arc<ServiceSnapshot>>,
}

/// Start the engine task on the current runtime.
pub fn spawn(options: EngineOptions) -> Result<EngineHandle, ApiError> {
    let mut world = World::from_scenario(&options.scenario).map_err(|e| ApiError::bad_request(e.to_string(), None))?;
    if let Some(path) = &options.config_path {
        if path.exists() {
            let zones = config_file::load(path).map_err(|e| ApiError::bad_request(e.to_string(), None))?;
            world.replace_zones(zones);
        }
    }
    let hub = EventHub::new(options.stream_capacity);
    let (requests, inbox) = mpsc::channel(64);
    let initial = Arc::new(ServiceSnapshot {
        run_state: RunState::Paused,
        speed: options.speed,
        world: world.snapshot(),
    });
    let (snap_tx, snapshots) = watch::channel(initial);
    let mut engine = Engine {
        world,
        published: 0,
        run_state: if options.start_running {
            RunState::Running
        } else {
            RunState::Paused
        },
        speed: options.speed.clamp(f64::MIN_POSITIVE, MAX_SPEED),
        config_path: options.config_path,
        hub: hub.clone(),
        snapshots: snap_tx,
    };
    engine.publish();
    tokio::spawn(engine.run(inbox));
    Ok(EngineHandle {
        requests,
        snapshots,
        hub,
    })
}

impl Engine {
    async fn run(mut self, mut inbox: mpsc::Receiver<Request>) {
        let mut next_tick = Instant::now() + self.period();
        loop {
            let running = self.run_state == RunState::Running;
            tokio::select! {
                req = inbox.recv() => {
                    let Some(req) = req else { break };
                    let was_running = running;
                    self.handle(req);
                    if !was_running && self.run_state == RunState::Running {
                        next_tick = Instant::now() + self.period();
                    }
                }
                _ = tokio::time::sleep_until(next_tick), if running => {
                    let now = Instant::now();
                    let mut steps = 0;
                    while next_tick <= now && steps < MAX_CATCH_UP {
                        self.world.step();
                        next_tick += self.period();
                        steps += 1;
                    }
                    if next_tick <= now {
                        next_tick = now + self.period();
                    }
                    self.publish();
                }
            }
        }
    }

    fn period(&self) -> Duration {
        Duration::from_secs_f64(self.world.dt() / self.speed)
    }

    fn status(&self) -> SimStatus {
        SimStatus {
            run_state: self.run_state,
            speed: self.speed,
            tick: self.world.tick(),
            clock: zonegov::trace::round3(self.world.clock()),
        }
    }

    fn publish(&mut self) {
        let events = self.world.log().since(self.published);
        self.hub.publish(events);
        self.published = self.world.log().len();
        let snap = ServiceSnapshot {
            run_state: self.run_state,
            speed: self.speed,
            world: self.world.snapshot(),
        };
        self.snapshots.send_replace(Arc::new(snap));
    }

    fn handle(&mut self, req: Request) {
        match req {
            Request::UpdateZone { id, patch, reply } => {
                let r = self.update_zone(&id, patch);
                self.publish();
                let _ = reply.send(r);
            }
            Request::Emergency { id, on, reply } => {
                let r = self
                    .world
                    .apply(&ZoneCommand::Emergency { zone: id, on })
                    .map_err(ApiError::from);
                if r.is_ok() {
                    self.persist();
                }
                self.publish();
                let _ = reply.send(r);
            }
            Request::Sim { action, reply } => {
                let r = self.sim(action);
                self.publish();
                let _ = reply.send(r);
            }
            Request::LoadScenario { scenario, reply } => {
                let r = self.load(&scenario);
                self.publish();
                let _ = reply.send(r);
            }
            Request::Config { action, reply } => {
                let r = self.config(action);
                self.publish();
                let _ = reply.send(r);
            }
        }
    }

    /// Validate the whole patch first so a rejected request changes nothing.
    fn update_zone(&mut self, id: &str, patch: ZonePatch) -> Result<ZoneConfig, ApiError> {
        let current = self.world.zones().get(id)?.clone();
        if let Some(limit) = patch.limit {
            if !(limit.is_finite() && limit > 0.0) {
                return Err(ApiError::bad_request(
                    "must be a positive speed in km/h",
                    Some("limit".into()),
                ));
            }
        }
        let mut commands = Vec::new();
        if let Some(schedule) = patch.schedule {
            commands.push(ZoneCommand::SetSchedule {
                zone: id.into(),
                schedule,
            });
        }
        if let Some(limit) = patch.limit {
            commands.push(ZoneCommand::SetLimit { zone: id.into(), limit });
        }
        if let Some(honk_free) = patch.honk_free {
            commands.push(ZoneCommand::SetHonkFree {
                zone: id.into(),
                honk_free,
            });
        }
        let mut zone = current;
        for c in &commands {
            zone = self.world.apply(c)?;
        }
        if !commands.is_empty() {
            self.persist();
        }
        Ok(zone)
    }

    fn sim(&mut self, action: SimAction) -> Result<SimStatus, ApiError> {
        match (action, self.run_state) {
            (SimAction::Start, RunState::Running) => return Err(ApiError::conflict("already running")),
            (SimAction::Start, RunState::Paused) => self.run_state = RunState::Running,
            (SimAction::Pause, RunState::Paused) => return Err(ApiError::conflict("already paused")),
            (SimAction::Pause, RunState::Running) => self.run_state = RunState::Paused,
            (SimAction::Step { .. }, RunState::Running) => {
                return Err(ApiError::conflict("pause the simulation before stepping"))
            }
            (SimAction::Step { ticks }, RunState::Paused) => {
                if ticks == 0 || ticks > 1_000_000 {
                    return Err(ApiError::bad_request(
                        "must be within 1..=1000000",
                        Some("ticks".into()),
                    ));
                }
                self.world.run_ticks(ticks);
            }
            (SimAction::Speed { multiplier }, _) => {
                if !(multiplier.is_finite() && multiplier > 0.0 && multiplier <= MAX_SPEED) {
                    return Err(ApiError::bad_request(
                        format!("must be within (0, {MAX_SPEED}]"),
                        Some("multiplier".into()),
                    ));
                }
                self.speed = multiplier;
            }
        }
        Ok(self.status())
    }

    fn load(&mut self, scenario: &Scenario) -> Result<SimStatus, ApiError> {
        if self.run_state == RunState::Running {
            return Err(ApiError::conflict("pause the simulation before loading a scenario"));
        }
        let world = World::from_scenario(scenario).map_err(|e| match e {
            zonegov::ScenarioError::Invalid { field, message } => ApiError::bad_request(message, Some(field)),
            other => ApiError::bad_request(other.to_string(), None),
        })?;
        self.world = world;
        self.published = 0;
        self.hub.publish(&[Event::new(
            self.world.clock(),
            EventKind::ConfigChange,
            "*",
            format!("scenario_loaded seed={} zones={}", scenario.seed, scenario.zones.len()),
        )]);
        Ok(self.status())
    }

    fn config(&mut self, action: ConfigAction) -> Result<usize, ApiError> {
        let path = self
            .config_path
            .clone()
            .ok_or_else(|| ApiError::conflict("service was started without a config path"))?;
        match action {
            ConfigAction::Save => {
                config_file::persist(self.world.zones(), &path).map_err(|e| ApiError::internal(e.to_string()))?;
            }
            ConfigAction::Reload => {
                // a bad file leaves the running config untouched
                let zones = config_file::load(&path).map_err(|e| ApiError::bad_request(e.to_string(), None))?;
                self.world.replace_zones(zones);
            }
        }
        Ok(self.world.zones().zones().len())
    }

    fn persist(&self) {
        if let Some(path) = &self.config_path {
            if let Err(e) = config_file::persist(self.world.zones(), path) {
                tracing::warn!(path = %path.display(), error = %e, "could not persist zone config");
            }
        }
    }
}
