//! Beacon frame codec.
//!
//! A frame is 16 bits on the air: a fixed 4-bit header, an 8-bit address and
//! a 4-bit data nibble, each field sent most significant bit first. The data
//! nibble carries a zone symbol index in bits 2..0 and the honk-free flag in
//! bit 3.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zone::ZoneKind;

/// Header preamble sent ahead of every frame.
pub const HEADER: u8 = 0b0101;
/// Total frame length on the air.
pub const FRAME_BITS: usize = 16;
/// Address shared by every governor unless a scenario overrides it.
pub const DEFAULT_SYSTEM_ADDRESS: u8 = 0xA5;
/// Consecutive matching frames needed before a reception is acted on.
pub const REQUIRED_MATCHES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("address {0:#x} does not fit in 8 bits")]
    AddressOutOfRange(u16),
    #[error("data {0:#x} does not fit in 4 bits")]
    DataOutOfRange(u8),
    #[error("frame has {0} bits, expected 16")]
    BadLength(usize),
    #[error("bad header {0:#06b}, expected 0b0101")]
    BadHeader(u8),
    #[error("unknown zone symbol {0:?}")]
    UnknownSymbol(char),
    #[error("symbol index {0} carries no zone symbol")]
    NoSymbol(u8),
    #[error("invalid hex frame {0:?}")]
    BadHex(String),
}

/// One encoded frame. The header is implicit and always [`HEADER`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Codeword {
    address: u8,
    data: u8,
}

impl Codeword {
    pub fn address(&self) -> u8 {
        self.address
    }

    pub fn data(&self) -> u8 {
        self.data
    }

    /// The frame as a 16-bit word, header in the top nibble.
    pub fn word(&self) -> u16 {
        (u16::from(HEADER) << 12) | (u16::from(self.address) << 4) | u16::from(self.data)
    }

    /// Transmission order, first bit on the air first.
    pub fn bits(&self) -> [bool; FRAME_BITS] {
        word_to_bits(self.word())
    }

    pub fn to_hex(&self) -> String {
        format!("{:04X}", self.word())
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Address and data recovered from a frame with a valid header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodedFrame {
    pub address: u8,
    pub data: u8,
}

pub fn encode_frame(address: u16, data: u8) -> Result<Codeword, CodecError> {
    let address = u8::try_from(address).map_err(|_| CodecError::AddressOutOfRange(address))?;
    if data > 0xF {
        return Err(CodecError::DataOutOfRange(data));
    }
    Ok(Codeword { address, data })
}

pub fn decode_frame(bits: &[bool]) -> Result<DecodedFrame, CodecError> {
    if bits.len() != FRAME_BITS {
        return Err(CodecError::BadLength(bits.len()));
    }
    let word = bits.iter().fold(0u16, |acc, &b| (acc << 1) | u16::from(b));
    decode_word(word)
}

/// Decode a frame already packed into a word (header in the top nibble).
pub fn decode_word(word: u16) -> Result<DecodedFrame, CodecError> {
    let header = (word >> 12) as u8;
    if header != HEADER {
        return Err(CodecError::BadHeader(header));
    }
    Ok(DecodedFrame {
        address: (word >> 4) as u8,
        data: (word & 0xF) as u8,
    })
}

pub fn word_to_bits(word: u16) -> [bool; FRAME_BITS] {
    let mut bits = [false; FRAME_BITS];
    for (i, bit) in bits.iter_mut().enumerate() {
        *bit = (word >> (FRAME_BITS - 1 - i)) & 1 == 1;
    }
    bits
}

/// Parse the 4-hex-digit text form, e.g. `"5A53"`, into frame bits.
pub fn parse_hex(text: &str) -> Result<Vec<bool>, CodecError> {
    let text = text.trim();
    let text = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .unwrap_or(text);
    let mut bits = Vec::with_capacity(text.len() * 4);
    for c in text.chars() {
        let nibble = c.to_digit(16).ok_or_else(|| CodecError::BadHex(text.to_string()))?;
        bits.extend((0..4).rev().map(|i| (nibble >> i) & 1 == 1));
    }
    Ok(bits)
}

pub fn decode_hex(text: &str) -> Result<DecodedFrame, CodecError> {
    decode_frame(&parse_hex(text)?)
}

/// Whether a symbol switches governance on or off for its zone kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Active,
    Release,
}

/// The six broadcast symbols: one active/release pair per zone kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    SchoolActive,
    SchoolRelease,
    OfficeActive,
    OfficeRelease,
    HospitalActive,
    HospitalRelease,
}

impl Symbol {
    pub const ALL: [Symbol; 6] = [
        Symbol::SchoolActive,
        Symbol::SchoolRelease,
        Symbol::OfficeActive,
        Symbol::OfficeRelease,
        Symbol::HospitalActive,
        Symbol::HospitalRelease,
    ];

    pub fn as_char(self) -> char {
        match self {
            Symbol::SchoolActive => '!',
            Symbol::SchoolRelease => '@',
            Symbol::OfficeActive => '#',
            Symbol::OfficeRelease => '$',
            Symbol::HospitalActive => '%',
            Symbol::HospitalRelease => '^',
        }
    }

    pub fn from_char(c: char) -> Result<Self, CodecError> {
        Symbol::ALL
            .into_iter()
            .find(|s| s.as_char() == c)
            .ok_or(CodecError::UnknownSymbol(c))
    }

    /// Index carried in the low three bits of the data nibble, 1..=6.
    pub fn index(self) -> u8 {
        match self {
            Symbol::SchoolActive => 1,
            Symbol::SchoolRelease => 2,
            Symbol::OfficeActive => 3,
            Symbol::OfficeRelease => 4,
            Symbol::HospitalActive => 5,
            Symbol::HospitalRelease => 6,
        }
    }

    pub fn from_index(index: u8) -> Result<Self, CodecError> {
        Symbol::ALL
            .into_iter()
            .find(|s| s.index() == index)
            .ok_or(CodecError::NoSymbol(index))
    }

    pub fn for_zone(kind: ZoneKind, command: Command) -> Self {
        match (kind, command) {
            (ZoneKind::School, Command::Active) => Symbol::SchoolActive,
            (ZoneKind::School, Command::Release) => Symbol::SchoolRelease,
            (ZoneKind::Office, Command::Active) => Symbol::OfficeActive,
            (ZoneKind::Office, Command::Release) => Symbol::OfficeRelease,
            (ZoneKind::Hospital, Command::Active) => Symbol::HospitalActive,
            (ZoneKind::Hospital, Command::Release) => Symbol::HospitalRelease,
        }
    }

    pub fn zone_kind(self) -> ZoneKind {
        match self {
            Symbol::SchoolActive | Symbol::SchoolRelease => ZoneKind::School,
            Symbol::OfficeActive | Symbol::OfficeRelease => ZoneKind::Office,
            Symbol::HospitalActive | Symbol::HospitalRelease => ZoneKind::Hospital,
        }
    }

    pub fn command(self) -> Command {
        match self {
            Symbol::SchoolActive | Symbol::OfficeActive | Symbol::HospitalActive => Command::Active,
            _ => Command::Release,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Contents of the data nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Payload {
    /// 0 is idle, 1..=6 name a [`Symbol`].
    pub symbol_index: u8,
    pub honk_free: bool,
}

impl Payload {
    pub fn pack(self) -> u8 {
        (u8::from(self.honk_free) << 3) | (self.symbol_index & 0b111)
    }

    pub fn unpack(nibble: u8) -> Self {
        Payload {
            symbol_index: nibble & 0b111,
            honk_free: nibble & 0b1000 != 0,
        }
    }

    pub fn symbol(self) -> Result<Symbol, CodecError> {
        Symbol::from_index(self.symbol_index)
    }
}

pub fn symbol_to_payload(symbol: char, honk_free: bool) -> Result<Payload, CodecError> {
    let symbol = Symbol::from_char(symbol)?;
    Ok(Payload {
        symbol_index: symbol.index(),
        honk_free,
    })
}

pub fn payload_to_symbol(payload: Payload) -> Result<char, CodecError> {
    payload.symbol().map(Symbol::as_char)
}

/// A reception the decoder has confirmed (the VT condition).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidTransmission {
    pub address: u8,
    pub payload: Payload,
    pub observed_at: f64,
}

/// Streaming triple-match check for one receiver channel.
///
/// `None` frames are gaps (decode failures) and reset the run.
#[derive(Debug, Clone)]
pub struct ReceptionValidator {
    local_address: u8,
    run_data: Option<u8>,
    run_len: usize,
}

impl ReceptionValidator {
    pub fn new(local_address: u8) -> Self {
        ReceptionValidator {
            local_address,
            run_data: None,
            run_len: 0,
        }
    }

    pub fn local_address(&self) -> u8 {
        self.local_address
    }

    /// Number of consecutive matching frames seen so far.
    pub fn run_len(&self) -> usize {
        self.run_len
    }

    pub fn reset(&mut self) {
        self.run_data = None;
        self.run_len = 0;
    }

    /// Feed one frame slot. Returns a valid transmission while the current
    /// run is at least [`REQUIRED_MATCHES`] long.
    pub fn push(&mut self, frame: Option<DecodedFrame>, now: f64) -> Option<ValidTransmission> {
        match frame {
            Some(f) if f.address == self.local_address => {
                if self.run_data == Some(f.data) {
                    self.run_len += 1;
                } else {
                    self.run_data = Some(f.data);
                    self.run_len = 1;
                }
            }
            _ => self.reset(),
        }
        if self.run_len >= REQUIRED_MATCHES {
            self.run_data.map(|data| ValidTransmission {
                address: self.local_address,
                payload: Payload::unpack(data),
                observed_at: now,
            })
        } else {
            None
        }
    }
}

/// Run the triple-match rule over a whole sequence of `(time, frame)` slots.
/// The most recent valid transmission is returned.
pub fn validate_reception<I>(frames: I, local_address: u8) -> Option<ValidTransmission>
where
    I: IntoIterator<Item = (f64, Option<DecodedFrame>)>,
{
    let mut validator = ReceptionValidator::new(local_address);
    frames.into_iter().filter_map(|(t, f)| validator.push(f, t)).last()
}
