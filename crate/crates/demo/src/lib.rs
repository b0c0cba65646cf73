//! Browser demo bindings.
//!
//! The [`Session`] and frame helpers are plain Rust returning JSON text so
//! they can be tested natively; the `#[wasm_bindgen]` items are thin
//! wrappers that turn error strings into JS exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use zonegov::codec::{decode_hex, encode_frame, Payload};
use zonegov::scenario::{default_scenario, ZoneCommand};
use zonegov::{Event, Scenario, Snapshot, World};

#[derive(Serialize)]
struct FrameView {
    hex: String,
    bits: String,
    address: u8,
    data: u8,
    symbol: Option<char>,
    honk_free: bool,
}

fn frame_view(address: u8, data: u8) -> FrameView {
    let word = (u16::from(zonegov::codec::HEADER) << 12) | (u16::from(address) << 4) | u16::from(data);
    let payload = Payload::unpack(data);
    FrameView {
        hex: format!("{word:04X}"),
        bits: format!("{word:016b}"),
        address,
        data,
        symbol: payload.symbol().ok().map(|s| s.as_char()),
        honk_free: payload.honk_free,
    }
}

pub fn encode_json(address: u32, data: u32) -> Result<String, String> {
    let address = u16::try_from(address).map_err(|_| format!("address {address:#x} does not fit in 8 bits"))?;
    let data = u8::try_from(data).map_err(|_| format!("data {data:#x} does not fit in 4 bits"))?;
    let cw = encode_frame(address, data).map_err(|e| e.to_string())?;
    Ok(to_json(&frame_view(cw.address(), cw.data())))
}

pub fn decode_json(hex: &str) -> Result<String, String> {
    let f = decode_hex(hex).map_err(|e| e.to_string())?;
    Ok(to_json(&frame_view(f.address, f.data)))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo views serialize")
}

#[derive(Serialize)]
struct Frame {
    snapshot: Snapshot,
    events: Vec<String>,
}

/// A running world plus the event cursor already handed to the page.
pub struct Session {
    world: World,
    cursor: usize,
}

impl Session {
    pub fn new(scenario_toml: &str) -> Result<Self, String> {
        let scenario = Scenario::parse(scenario_toml).map_err(|e| e.to_string())?;
        let world = World::from_scenario(&scenario).map_err(|e| e.to_string())?;
        Ok(Session { world, cursor: 0 })
    }

    /// Advance `ticks` ticks and return the snapshot plus new trace lines.
    pub fn step(&mut self, ticks: u32) -> String {
        self.world.run_ticks(u64::from(ticks));
        self.frame()
    }

    pub fn emergency(&mut self, zone: &str, on: bool) -> Result<String, String> {
        self.world
            .apply(&ZoneCommand::Emergency {
                zone: zone.to_string(),
                on,
            })
            .map_err(|e| e.to_string())?;
        Ok(self.frame())
    }

    pub fn horn(&mut self, vehicle: &str, pressed: bool) -> Result<String, String> {
        if !self.world.set_horn(vehicle, pressed) {
            return Err(format!("unknown vehicle {vehicle:?}"));
        }
        Ok(self.frame())
    }

    fn frame(&mut self) -> String {
        let events: Vec<String> = self.world.log().since(self.cursor).iter().map(Event::to_line).collect();
        self.cursor += events.len();
        to_json(&Frame {
            snapshot: self.world.snapshot(),
            events,
        })
    }
}

pub fn example_toml() -> String {
    default_scenario().to_toml()
}

#[wasm_bindgen(js_name = encodeFrame)]
pub fn encode_frame_js(address: u32, data: u32) -> Result<String, JsError> {
    encode_json(address, data).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = decodeFrame)]
pub fn decode_frame_js(hex: &str) -> Result<String, JsError> {
    decode_json(hex).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = exampleScenario)]
pub fn example_scenario_js() -> String {
    example_toml()
}

#[wasm_bindgen]
pub struct DemoWorld(Session);

#[wasm_bindgen]
impl DemoWorld {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario_toml: &str) -> Result<DemoWorld, JsError> {
        Session::new(scenario_toml).map(DemoWorld).map_err(|e| JsError::new(&e))
    }

    pub fn step(&mut self, ticks: u32) -> String {
        self.0.step(ticks)
    }

    pub fn emergency(&mut self, zone: &str, on: bool) -> Result<String, JsError> {
        self.0.emergency(zone, on).map_err(|e| JsError::new(&e))
    }

    pub fn horn(&mut self, vehicle: &str, pressed: bool) -> Result<String, JsError> {
        self.0.horn(vehicle, pressed).map_err(|e| JsError::new(&e))
    }
}
