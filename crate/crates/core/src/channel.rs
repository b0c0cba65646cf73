//! Simulated broadcast medium.
//!
//! Reception is a hard disc around each transmitter. Two transmitters on the
//! same frequency heard at once collide and the receiver gets random bits.
//! A lone transmitter's frame arrives with independent bit flips.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Codeword, FRAME_BITS};

/// Carrier frequency in kHz, so it can key maps and compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frequency(u32);

impl Frequency {
    pub fn from_mhz(mhz: f64) -> Self {
        Frequency((mhz * 1000.0).round() as u32)
    }

    pub fn khz(self) -> u32 {
        self.0
    }

    pub fn mhz(self) -> f64 {
        f64::from(self.0) / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterSite {
    pub zone_id: String,
    /// Meters along the road.
    pub position: f64,
    /// Meters.
    pub range: f64,
    pub frequency: Frequency,
    /// Seconds between frame repeats.
    pub repeat_period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    #[serde(default)]
    pub bit_error_rate: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            bit_error_rate: 0.0,
            rng_seed: 1,
        }
    }
}

/// What one receiver hears on one frequency during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reception {
    pub frequency: Frequency,
    /// 16 received bits, first on the air in the top bit.
    pub word: u16,
    pub collided: bool,
}

pub fn in_range(site: &TransmitterSite, pos: f64) -> bool {
    (pos - site.position).abs() <= site.range
}

/// Deliver this tick's frames to a receiver at `receiver_pos`.
///
/// `receiver` distinguishes receivers so their noise is independent.
/// Output is sorted by frequency; frequencies with nothing in range are
/// absent.
pub fn propagate(
    active: &[(&TransmitterSite, Codeword)],
    receiver_pos: f64,
    params: &ChannelParams,
    tick: u64,
    receiver: u64,
) -> Vec<Reception> {
    let mut heard: BTreeMap<Frequency, Vec<Codeword>> = BTreeMap::new();
    for (site, cw) in active {
        if in_range(site, receiver_pos) {
            heard.entry(site.frequency).or_default().push(*cw);
        }
    }
    heard
        .into_iter()
        .map(|(frequency, frames)| {
            let mut rng = stream_rng(params.rng_seed, tick, receiver, frequency);
            if let [cw] = frames.as_slice() {
                Reception {
                    frequency,
                    word: flip_bits(cw.word(), params.bit_error_rate, &mut rng),
                    collided: false,
                }
            } else {
                Reception {
                    frequency,
                    word: rng.next_u32() as u16,
                    collided: true,
                }
            }
        })
        .collect()
}

/// Flip each of the 16 bits independently with probability `ber`.
pub fn flip_bits<R: Rng>(word: u16, ber: f64, rng: &mut R) -> u16 {
    let ber = ber.clamp(0.0, 1.0);
    let mut mask = 0u16;
    for i in 0..FRAME_BITS {
        if rng.random_bool(ber) {
            mask |= 1 << i;
        }
    }
    word ^ mask
}

fn stream_rng(seed: u64, tick: u64, receiver: u64, frequency: Frequency) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for part in [tick, receiver, u64::from(frequency.khz())] {
        h = splitmix(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
