//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Every tolerance used is a named constant below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use zonegov::codec::{decode_frame, decode_hex, encode_frame, word_to_bits, DecodedFrame, ReceptionValidator};
use zonegov::scenario::{default_scenario, ChannelSpec, ObstacleSpec, ScheduledCommand, VehicleSpec};
use zonegov::sim::{run_scenario, World};
use zonegov::vehicle::{obstacle_threshold, Governance, Kinematics};
use zonegov::zone::{Schedule, TimeOfDay, ZoneConfig, ZoneKind};
use zonegov::{EventKind, Scenario, ZoneCommand};

/// Codec sweep wall-clock budget.
const CODEC_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_SEQUENCES: usize = 10_000;
const ORACLE_MAX_LEN: usize = 50;
/// Governed speed must settle to at most limit + this.
const SETTLE_TOLERANCE_KMH: f64 = 0.1;
const OFFICE_PASS_BUDGET: Duration = Duration::from_secs(5);
const DT: f64 = 0.1;
const REPEAT_PERIOD: f64 = 0.1;
const LOSS_TIMEOUT: f64 = 1.0;
const DECEL: f64 = 5.0;
const ACCEL: f64 = 3.0;
/// Frames needed before a receiver acts.
const VALIDATION_FRAMES: f64 = 3.0;
const HORN_TICKS: u64 = 1000;
const HORN_SCENARIOS: u64 = 20;
const OBSTACLE_SCENARIOS: u64 = 1000;
const OBSTACLE_TICKS: u64 = 400;
const SENSOR_MARGIN_M: f64 = 2.0;
const COCHANNEL_MAX_RATE: f64 = 0.01;
const DISTINCT_MIN_RATE: f64 = 0.99;
const EPS: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn car(id: &str, position: f64, speed: f64, demand: f64) -> VehicleSpec {
    VehicleSpec {
        id: id.into(),
        position,
        speed,
        demand,
        gear: None,
        governor: true,
        horn: vec![],
    }
}

fn bare(start: TimeOfDay, duration: f64) -> Scenario {
    Scenario {
        start_time: start,
        duration,
        dt: DT,
        road_length: 3000.0,
        zones: vec![],
        vehicles: vec![],
        obstacles: vec![],
        commands: vec![],
        channel: ChannelSpec { bit_error_rate: 0.0 },
        ..default_scenario()
    }
}

/// Analytic time to brake from `from` to `to` km/h.
fn settle_seconds(from: f64, to: f64) -> f64 {
    ((from - to) / 3.6 / DECEL).max(0.0)
}

fn codec_round_trip() -> Outcome {
    let started = Instant::now();
    let mut pairs = 0;
    let mut rejected = 0;
    for address in 0u16..=0xFF {
        for data in 0u8..=0xF {
            let cw = encode_frame(address, data).map_err(|e| e.to_string())?;
            let expected = 0x5000 | (address << 4) | u16::from(data);
            check(cw.word() == expected, || {
                format!("{address:#x}/{data:#x} encoded as {:#06x}", cw.word())
            })?;
            let back = decode_frame(&cw.bits()).map_err(|e| e.to_string())?;
            check(
                back == DecodedFrame {
                    address: address as u8,
                    data,
                },
                || format!("{address:#x}/{data:#x} decoded as {back:?}"),
            )?;
            check(decode_hex(&cw.to_hex()) == Ok(back), || {
                format!("hex form of {address:#x}/{data:#x}")
            })?;
            pairs += 1;
            for mask in 1u16..=0xF {
                let corrupted = word_to_bits(expected ^ (mask << 12));
                check(decode_frame(&corrupted).is_err(), || {
                    format!("header mask {mask:#x} accepted on {expected:#06x}")
                })?;
                rejected += 1;
            }
            let mut short = cw.bits().to_vec();
            short.pop();
            check(decode_frame(&short).is_err(), || "15-bit frame accepted".into())?;
        }
    }
    check(
        encode_frame(0x100, 0).is_err() && encode_frame(0, 0x10).is_err(),
        || "out-of-range fields accepted".into(),
    )?;
    let elapsed = started.elapsed();
    check(elapsed < CODEC_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{pairs} pairs, {rejected} corrupted headers rejected, {elapsed:.2?}"
    ))
}

/// Brute force: slot i is valid iff slots i-2..=i are all frames for the
/// local address carrying identical data.
fn oracle(slots: &[Option<DecodedFrame>], local: u8) -> Vec<Option<u8>> {
    (0..slots.len())
        .map(|i| {
            if i < 2 {
                return None;
            }
            let window = &slots[i - 2..=i];
            let data = window[0]?.data;
            window
                .iter()
                .all(|f| matches!(f, Some(f) if f.address == local && f.data == data))
                .then_some(data)
        })
        .collect()
}

fn validator_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A11);
    let local = 0xA5;
    let mut slots_checked = 0;
    let mut valid_seen = 0;
    for seq in 0..ORACLE_SEQUENCES {
        let len = rng.random_range(0..=ORACLE_MAX_LEN);
        // small alphabet so runs of three are common
        let slots: Vec<Option<DecodedFrame>> = (0..len)
            .map(|_| match rng.random_range(0..10) {
                0 => None,
                1 => Some(DecodedFrame {
                    address: 0x5A,
                    data: rng.random_range(0..2),
                }),
                _ => Some(DecodedFrame {
                    address: local,
                    data: rng.random_range(0..2),
                }),
            })
            .collect();
        let expected = oracle(&slots, local);
        let mut v = ReceptionValidator::new(local);
        for (i, (slot, want)) in slots.iter().zip(&expected).enumerate() {
            let got = v.push(*slot, i as f64).map(|vt| vt.payload.pack());
            check(got == *want, || {
                format!("sequence {seq} slot {i}: validator {got:?}, oracle {want:?}")
            })?;
            valid_seen += usize::from(got.is_some());
            slots_checked += 1;
        }
        let last = zonegov::codec::validate_reception(slots.iter().enumerate().map(|(i, s)| (i as f64, *s)), local);
        let want_last = expected.iter().rposition(Option::is_some);
        check(last.map(|vt| vt.observed_at as usize) == want_last, || {
            format!("sequence {seq}: batch validator disagrees")
        })?;
    }
    check(valid_seen > 0, || "no valid slots generated".into())?;
    Ok(format!(
        "{ORACLE_SEQUENCES} sequences, {slots_checked} slots, {valid_seen} valid, 100% agreement"
    ))
}

fn zone(id: &str, kind: ZoneKind, start: f64, end: f64, schedule: Schedule) -> ZoneConfig {
    ZoneConfig::new(id, kind, start, end, schedule)
}

fn office_pass_in_hours() -> Outcome {
    let started = Instant::now();
    let (limit, demand) = (45.0, 80.0);
    let mut s = bare(TimeOfDay::hm(10, 0), 60.0);
    let mut office = zone(
        "office",
        ZoneKind::Office,
        1000.0,
        1200.0,
        Schedule::window(TimeOfDay::hm(9, 0), TimeOfDay::hm(18, 0)),
    );
    office.limit = limit;
    s.zones = vec![office];
    s.vehicles = vec![car("v", 700.0, demand, demand)];
    let mut w = World::from_scenario(&s).map_err(|e| e.to_string())?;
    let t0 = w.clock();

    let mut governed: Option<(f64, f64)> = None;
    let mut released = None;
    let mut exited = None;
    let mut worst_late = f64::NEG_INFINITY;
    let mut back_to_demand = None;
    while w.elapsed() < s.duration - EPS {
        let before = w.vehicle("v").unwrap().speed;
        let now = w.clock() - t0;
        let events = w.step().to_vec();
        let v = w.vehicle("v").unwrap().clone();
        for e in &events {
            match e.kind {
                EventKind::Governed if governed.is_none() => governed = Some((now, before)),
                EventKind::Released => released = Some(now),
                _ => {}
            }
        }
        let t = w.clock() - t0;
        if exited.is_none() && v.position > 1200.0 {
            exited = Some(t);
        }
        if let (Some((tg, v0)), None) = (governed, released) {
            let deadline = tg + (settle_seconds(v0, limit) / DT - EPS).ceil() * DT;
            if t >= deadline - EPS {
                worst_late = worst_late.max(v.speed);
            }
        }
        if released.is_some() && back_to_demand.is_none() && v.speed >= demand {
            back_to_demand = Some(t);
        }
    }
    let metrics = w.metrics().clone();
    let (tg, v0) = governed.ok_or("never governed")?;
    let tr = released.ok_or("never released")?;
    let te = exited.ok_or("never left the zone")?;
    let back = back_to_demand.ok_or("never returned to demand")?;
    check(worst_late <= limit + SETTLE_TOLERANCE_KMH, || {
        format!("governed speed {worst_late} after settle deadline")
    })?;
    check(metrics.violations == 0, || format!("{} violations", metrics.violations))?;
    check(tr >= te - EPS && tr <= te + LOSS_TIMEOUT + DT + EPS, || {
        format!("released at {tr:.1}, exit at {te:.1}")
    })?;
    let recover = ((demand - limit) / 3.6 / ACCEL / DT - EPS).ceil() * DT;
    check(back <= tr + recover + DT + EPS, || {
        format!("back to {demand} at {back:.1}, released {tr:.1}")
    })?;
    check(w.vehicle("v").unwrap().speed == demand, || {
        "final speed is not the demand".into()
    })?;
    let elapsed = started.elapsed();
    check(elapsed < OFFICE_PASS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "governed at {tg:.1}s from {v0} km/h, settle deadline +{:.1}s, max after {worst_late:.1} km/h, exit {te:.1}s, release {tr:.1}s, 80 km/h at {back:.1}s, {elapsed:.2?}",
        (settle_seconds(v0, limit) / DT - EPS).ceil() * DT
    ))
}

fn school_pass(start: TimeOfDay) -> Result<u64, String> {
    let mut s = bare(start, 60.0);
    s.zones = vec![zone(
        "school",
        ZoneKind::School,
        1000.0,
        1200.0,
        Schedule::window(TimeOfDay::hm(8, 0), TimeOfDay::hm(17, 0)),
    )];
    s.zones[0].honk_free = true;
    s.vehicles = vec![car("v", 700.0, 80.0, 80.0)];
    let out = run_scenario(&s, None).map_err(|e| e.to_string())?;
    Ok(out.events.iter().filter(|e| e.kind == EventKind::Governed).count() as u64)
}

fn school_pass_after_hours() -> Outcome {
    let night = school_pass(TimeOfDay::hm(20, 0))?;
    let day = school_pass(TimeOfDay::hm(10, 0))?;
    check(night == 0, || format!("{night} governed events after hours"))?;
    check(day > 0, || "control pass in hours was not governed".into())?;
    Ok(format!("20:00 pass: {night} governed; 10:00 control: {day} governed"))
}

fn hospital_emergency_release() -> Outcome {
    let at = 20.0;
    let mut s = bare(TimeOfDay::hm(2, 0), 30.0);
    s.zones = vec![zone("hospital", ZoneKind::Hospital, 600.0, 1400.0, Schedule::always())];
    s.vehicles = (0..4)
        .map(|i| car(&format!("v{i}"), 700.0 + 100.0 * i as f64, 25.0, 60.0 + 10.0 * i as f64))
        .collect();
    s.commands = vec![ScheduledCommand {
        at,
        command: ZoneCommand::Emergency {
            zone: "hospital".into(),
            on: true,
        },
    }];
    let out = run_scenario(&s, None).map_err(|e| e.to_string())?;
    let t0 = f64::from(s.start_time.seconds());
    let bound = DT + VALIDATION_FRAMES * REPEAT_PERIOD;
    let mut worst: f64 = 0.0;
    for v in &s.vehicles {
        let mine = |k: EventKind| out.events.iter().filter(move |e| e.kind == k && e.subject == v.id);
        let governed_before = mine(EventKind::Governed).any(|e| e.time - t0 < at);
        check(governed_before, || {
            format!("{} was not governed before the emergency", v.id)
        })?;
        let release = mine(EventKind::Released)
            .find(|e| e.time - t0 >= at - EPS)
            .ok_or_else(|| format!("{} never released", v.id))?;
        check(release.field("reason") == Some("release_symbol"), || {
            format!("{} released by {:?}", v.id, release.field("reason"))
        })?;
        let latency = release.time - t0 - at;
        worst = worst.max(latency);
        check(latency <= bound + EPS, || {
            format!("{} released {latency:.3}s after the emergency", v.id)
        })?;
        check(out.world.vehicle(&v.id).unwrap().zone.is_none(), || {
            format!("{} governed again", v.id)
        })?;
    }
    Ok(format!(
        "{} vehicles released, worst {worst:.1}s (bound {bound:.1}s)",
        s.vehicles.len()
    ))
}

fn random_scenario(rng: &mut ChaCha8Rng, seed: u64) -> Scenario {
    let mut s = bare(TimeOfDay::hm(rng.random_range(0..24), 0), 120.0);
    s.seed = seed;
    s.road_length = 2500.0;
    s.channel.bit_error_rate = [0.0, 0.001, 0.01][rng.random_range(0..3)];
    let kinds = [ZoneKind::School, ZoneKind::Office, ZoneKind::Hospital];
    let zones = rng.random_range(0..=3);
    for i in 0..zones {
        let start = 300.0 + 700.0 * i as f64 + rng.random_range(0.0..100.0);
        let kind = kinds[rng.random_range(0..3)];
        let schedule = if rng.random_bool(0.5) {
            Schedule::always()
        } else {
            Schedule::window(
                TimeOfDay::hm(rng.random_range(0..24), 0),
                TimeOfDay::hm(rng.random_range(0..24), 0),
            )
        };
        let mut z = zone(
            &format!("z{i}"),
            kind,
            start,
            start + rng.random_range(100.0..400.0),
            schedule,
        );
        z.honk_free = rng.random_bool(0.6);
        z.frequency_mhz = 433.0 + i as f64;
        s.zones.push(z);
    }
    s
}

fn horn_masking() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x40E);
    let (mut co, mut suppressed, mut sounded, mut ticks) = (0u64, 0u64, 0u64, 0u64);
    for n in 0..HORN_SCENARIOS {
        let mut s = random_scenario(&mut rng, n);
        // force at least one honk-free zone in force so the check is not vacuous
        s.zones.push({
            let mut z = zone("quiet", ZoneKind::Hospital, 2200.0, 2450.0, Schedule::always());
            z.honk_free = true;
            z.frequency_mhz = 440.0;
            z
        });
        for i in 0..rng.random_range(1..5) {
            let mut v = car(
                &format!("v{i}"),
                150.0 * i as f64,
                rng.random_range(0.0..120.0),
                rng.random_range(0.0..130.0),
            );
            let mut t = 0.0;
            while t < 100.0 {
                let from = t + rng.random_range(0.0..10.0);
                let to = from + rng.random_range(0.5..5.0);
                v.horn.push([from, to]);
                t = to;
            }
            s.vehicles.push(v);
        }
        s.vehicles.reverse();
        let mut w = World::from_scenario(&s).map_err(|e| e.to_string())?;
        for _ in 0..HORN_TICKS {
            w.step();
            ticks += 1;
            for v in w.vehicles() {
                let quiet = v.zone.is_some_and(|z| z.honk_free)
                    || matches!(v.governance(), Governance::Governed(r) if r.honk_free);
                if v.horn_output && quiet {
                    co += 1;
                }
                suppressed += u64::from(v.horn_request && quiet);
                sounded += u64::from(v.horn_output);
            }
        }
    }
    check(co == 0, || {
        format!("{co} ticks with horn output under honk-free governance")
    })?;
    check(suppressed > 0 && sounded > 0, || {
        format!("vacuous: {suppressed} suppressed, {sounded} sounded")
    })?;
    Ok(format!("{HORN_SCENARIOS} scenarios x {HORN_TICKS} ticks ({ticks} ticks): 0 co-occurrences, {suppressed} suppressed, {sounded} sounded"))
}

fn obstacle_gap() -> Outcome {
    let kin = Kinematics::default();
    for kmh in (0..=130).map(f64::from) {
        let floor = (kmh / 3.6).powi(2) / (2.0 * kin.decel_max) + SENSOR_MARGIN_M;
        check(obstacle_threshold(kmh, &kin, DT) >= floor, || {
            format!("threshold below v²/2a + 2 at {kmh} km/h")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0B57);
    let mut min_gap = f64::INFINITY;
    let mut halts = 0;
    for n in 0..OBSTACLE_SCENARIOS {
        let mut s = random_scenario(&mut rng, n);
        s.duration = OBSTACLE_TICKS as f64 * DT;
        let wall = rng.random_range(300.0..2400.0);
        s.obstacles.push(ObstacleSpec {
            id: "wall".into(),
            position: wall,
        });
        if rng.random_bool(0.3) {
            s.obstacles.push(ObstacleSpec {
                id: "debris".into(),
                position: rng.random_range(100.0..wall),
            });
        }
        // admit vehicles front to back, each starting beyond its sensor
        // threshold of whatever is already ahead of it
        let mut candidates: Vec<f64> = (0..rng.random_range(1..5))
            .map(|_| rng.random_range(0.0..wall))
            .collect();
        candidates.sort_by(|a, b| b.total_cmp(a));
        for (i, pos) in candidates.into_iter().enumerate() {
            let speed = rng.random_range(0.0..120.0);
            let ahead = s
                .obstacles
                .iter()
                .map(|o| o.position)
                .chain(s.vehicles.iter().map(|v| v.position))
                .filter(|p| *p > pos)
                .fold(f64::INFINITY, f64::min);
            if ahead - pos > obstacle_threshold(speed, &kin, DT) + kin.obstacle_hysteresis {
                s.vehicles
                    .push(car(&format!("v{i}"), pos, speed, rng.random_range(0.0..130.0)));
            }
        }
        if s.vehicles.is_empty() {
            s.vehicles.push(car("v0", 0.0, 0.0, 120.0));
        }
        let mut w = World::from_scenario(&s).map_err(|e| e.to_string())?;
        let fixed: Vec<f64> = s.obstacles.iter().map(|o| o.position).collect();
        let start: Vec<(String, f64)> = s.vehicles.iter().map(|v| (v.id.clone(), v.position)).collect();
        for _ in 0..OBSTACLE_TICKS {
            w.step();
            for (id, p0) in &start {
                let p = w.vehicle(id).unwrap().position;
                for &o in fixed.iter().filter(|&&o| o > *p0) {
                    min_gap = min_gap.min(o - p);
                }
                for (other, _) in start.iter().filter(|(_, q0)| q0 > p0) {
                    min_gap = min_gap.min(w.vehicle(other).unwrap().position - p);
                }
            }
            check(min_gap > 0.0, || format!("scenario {n}: contact, gap {min_gap:.3} m"))?;
        }
        halts += w.metrics().halts;
    }
    check(halts > 0, || "no scenario ever halted".into())?;
    Ok(format!(
        "{OBSTACLE_SCENARIOS} scenarios, min gap {min_gap:.3} m, {halts} halts"
    ))
}

fn co_channel_rate(distinct: bool) -> Result<f64, String> {
    let mut s = bare(TimeOfDay::hm(12, 0), 60.0);
    let mut a = zone("a", ZoneKind::Office, 0.0, 400.0, Schedule::always());
    let mut b = zone("b", ZoneKind::School, 300.0, 700.0, Schedule::always());
    a.frequency_mhz = 433.92;
    b.frequency_mhz = if distinct { 434.42 } else { 433.92 };
    s.zones = vec![a, b];
    s.vehicles = vec![car("rx", 350.0, 0.0, 0.0)];
    let out = run_scenario(&s, None).map_err(|e| e.to_string())?;
    let stats = out.world.reception_stats("rx").ok_or("no receiver")?;
    check(stats.frames_heard > 0, || "receiver heard nothing".into())?;
    Ok(stats.valid_rate())
}

fn co_channel() -> Outcome {
    let shared = co_channel_rate(false)?;
    let split = co_channel_rate(true)?;
    check(shared < COCHANNEL_MAX_RATE, || {
        format!("shared-frequency valid rate {shared:.4}")
    })?;
    check(split > DISTINCT_MIN_RATE, || {
        format!("distinct-frequency valid rate {split:.4}")
    })?;
    Ok(format!(
        "same frequency {:.2}%, distinct {:.2}%",
        shared * 100.0,
        split * 100.0
    ))
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("zonegov-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut s = default_scenario();
    s.seed = 4242;
    s.channel.bit_error_rate = 0.01;
    let mut files = Vec::new();
    for name in ["a.tsv", "b.tsv"] {
        let path = dir.join(name);
        std::fs::write(&path, run_scenario(&s, None).map_err(|e| e.to_string())?.trace_text())
            .map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    check(!files[0].is_empty(), || "empty trace".into())?;
    check(files[0] == files[1], || "traces differ".into())?;
    s.seed = 4243;
    let other = run_scenario(&s, None).map_err(|e| e.to_string())?.trace_text();
    check(other.as_bytes() != files[0], || "seed has no effect".into())?;
    Ok(format!("{} bytes identical across runs", files[0].len()))
}

async fn service_contract() -> Outcome {
    use zonegov_service::{serve_background, EngineOptions, STREAM_CAPACITY};
    let (addr, _engine) = serve_background(EngineOptions {
        scenario: default_scenario(),
        config_path: None,
        speed: 1.0,
        start_running: false,
        stream_capacity: STREAM_CAPACITY,
    })
    .await
    .map_err(|e| e.to_string())?;
    let c = Client::new();
    let url = |p: &str| format!("http://{addr}{p}");
    let err = |e: reqwest::Error| e.to_string();

    let stream = c.get(url("/events?from=0")).send().await.map_err(err)?;

    let zones: Vec<Value> = c
        .get(url("/zones"))
        .send()
        .await
        .map_err(err)?
        .json()
        .await
        .map_err(err)?;
    check(zones.len() == 3, || format!("{} zones listed", zones.len()))?;
    let r = c
        .put(url("/zones/school"))
        .json(&json!({"schedule": {"open": "08:00", "close": "17:00"}}))
        .send()
        .await
        .map_err(err)?;
    check(r.status() == StatusCode::OK, || {
        format!("PUT schedule -> {}", r.status())
    })?;
    let r = c
        .put(url("/zones/office"))
        .json(&json!({"limit": 40}))
        .send()
        .await
        .map_err(err)?;
    check(r.status() == StatusCode::OK, || format!("PUT limit -> {}", r.status()))?;
    let z: Value = c
        .get(url("/zones/office"))
        .send()
        .await
        .map_err(err)?
        .json()
        .await
        .map_err(err)?;
    check(z["limit"] == 40.0, || format!("read-your-write failed: {z}"))?;
    let r = c
        .put(url("/zones/school"))
        .json(&json!({"limit": -5}))
        .send()
        .await
        .map_err(err)?;
    check(r.status() == StatusCode::BAD_REQUEST, || {
        format!("PUT limit -5 -> {}", r.status())
    })?;
    let body: Value = r.json().await.map_err(err)?;
    check(body["field"] == "limit", || format!("error field {}", body["field"]))?;
    let r = c
        .put(url("/zones/nowhere"))
        .json(&json!({"limit": 30}))
        .send()
        .await
        .map_err(err)?;
    check(r.status() == StatusCode::NOT_FOUND, || {
        format!("unknown zone -> {}", r.status())
    })?;
    let r = c
        .post(url("/sim"))
        .json(&json!({"action": "pause"}))
        .send()
        .await
        .map_err(err)?;
    check(r.status() == StatusCode::CONFLICT, || {
        format!("pause while paused -> {}", r.status())
    })?;

    let mark = c
        .get(url("/trace"))
        .send()
        .await
        .map_err(err)?
        .text()
        .await
        .map_err(err)?
        .lines()
        .count();
    let r = c
        .post(url("/zones/hospital/emergency"))
        .json(&json!({"state": "on"}))
        .send()
        .await
        .map_err(err)?;
    check(r.status() == StatusCode::OK, || format!("emergency -> {}", r.status()))?;
    c.post(url("/sim"))
        .json(&json!({"action": "step", "ticks": 1}))
        .send()
        .await
        .map_err(err)?;
    let trace = c
        .get(url(&format!("/trace?from={mark}")))
        .send()
        .await
        .map_err(err)?
        .text()
        .await
        .map_err(err)?;
    check(
        trace
            .lines()
            .any(|l| l.contains("\ttx\thospital\t") && l.contains("symbol=^")),
        || "no release symbol within 1 tick".into(),
    )?;

    let log = c
        .get(url("/trace"))
        .send()
        .await
        .map_err(err)?
        .text()
        .await
        .map_err(err)?;
    let lines: Vec<&str> = log.lines().collect();
    let changes = lines.iter().filter(|l| l.contains("\tconfig_change\t")).count();
    check(changes == 3, || {
        format!("{changes} config_change events for 3 accepted mutations")
    })?;
    let got = read_sse(stream, lines.len()).await?;
    for (i, (id, data)) in got.iter().enumerate() {
        check(*id == i && data == lines[i], || {
            format!("stream message {i} is #{id} {data:?}")
        })?;
    }
    let resumed = c
        .get(url("/events"))
        .header("Last-Event-ID", "2")
        .send()
        .await
        .map_err(err)?;
    let again = read_sse(resumed, 2).await?;
    check(again[0].0 == 3 && again[1].0 == 4, || {
        format!("resume delivered {:?}", again.iter().map(|g| g.0).collect::<Vec<_>>())
    })?;
    Ok(format!(
        "CRUD, 400/404/409, emergency within 1 tick, {} stream messages in order, resume",
        got.len()
    ))
}

async fn read_sse(mut resp: reqwest::Response, count: usize) -> Result<Vec<(usize, String)>, String> {
    let mut buf = String::new();
    let mut out = Vec::new();
    while out.len() < count {
        let chunk = tokio::time::timeout(Duration::from_secs(5), resp.chunk())
            .await
            .map_err(|_| "stream stalled".to_string())?
            .map_err(|e| e.to_string())?
            .ok_or("stream ended")?;
        buf.push_str(&String::from_utf8_lossy(&chunk));
        while let Some(end) = buf.find("\n\n") {
            let msg: String = buf.drain(..end + 2).collect();
            let id = msg
                .lines()
                .find_map(|l| l.strip_prefix("id:"))
                .and_then(|v| v.trim().parse().ok());
            let data = msg
                .lines()
                .find_map(|l| l.strip_prefix("data:"))
                .map(|v| v.strip_prefix(' ').unwrap_or(v).to_string());
            if let (Some(id), Some(data)) = (id, data) {
                out.push((id, data));
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let criteria: Vec<Criterion> = vec![
        (
            "codec exhaustive round-trip and header rejection",
            Box::new(codec_round_trip),
        ),
        (
            "triple validation matches sliding-window oracle",
            Box::new(validator_equivalence),
        ),
        (
            "office pass in hours settles, no violations, reverts",
            Box::new(office_pass_in_hours),
        ),
        (
            "school pass after hours is never governed",
            Box::new(school_pass_after_hours),
        ),
        (
            "hospital emergency releases all governed vehicles",
            Box::new(hospital_emergency_release),
        ),
        ("horn never sounds under honk-free governance", Box::new(horn_masking)),
        ("obstacle sensor keeps every gap positive", Box::new(obstacle_gap)),
        ("co-channel collision vs distinct frequencies", Box::new(co_channel)),
        ("same scenario and seed give identical traces", Box::new(determinism)),
        (
            "service contract via scripted HTTP client",
            Box::new(|| runtime.block_on(service_contract())),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
