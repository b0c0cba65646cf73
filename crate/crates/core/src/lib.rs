//! Zone-based electronic speed governance.
//!
//! Roadside transmitters broadcast 16-bit beacon frames naming a zone kind;
//! governed vehicles validate three matching frames in a row, then cap their
//! speed, mask the horn in honk-free zones and halt for obstacles. [`sim`]
//! ties the pieces into a deterministic discrete-time world.

pub mod channel;
pub mod codec;
pub mod config_file;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod vehicle;
pub mod zone;

pub use codec::{decode_frame, encode_frame, Codeword, Payload, Symbol, ValidTransmission};
pub use scenario::{Scenario, ScenarioError, ZoneCommand};
pub use sim::{run_scenario, RunOutput, Snapshot, World};
pub use trace::{Event, EventKind, Metrics};
pub use zone::{ZoneConfig, ZoneController, ZoneError, ZoneKind};
