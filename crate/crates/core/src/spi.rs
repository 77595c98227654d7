//! 24-bit SPI register-write frames used to toggle the LO divider.
//!
//! Wire layout, most significant bit first:
//!
//! ```text
//!  23  22..20  19..18  17..8     7..0
//! [W] [ N:3 ] [ 00  ] [addr:10] [data:8]
//! ```
//!
//! `W` is the write flag and `N` the number of additional bytes in the
//! transfer (0 for a single-register write). The two bits between `N` and
//! the address are reserved and must be zero.

use serde::Serialize;
use thiserror::Error;

use crate::ensm::ClockConfig;
use crate::time::TimeSpan;

/// Bits in a single-register write.
pub const FRAME_BITS: usize = 24;
/// Highest SPI clock the transceiver accepts.
pub const MAX_SPI_CLOCK_HZ: u64 = 50_000_000;

const WRITE_SHIFT: u32 = 23;
const COUNT_SHIFT: u32 = 20;
const RESERVED_SHIFT: u32 = 18;
const ADDR_SHIFT: u32 = 8;
const COUNT_MASK: u32 = 0x7;
const RESERVED_MASK: u32 = 0x3;
const ADDR_MASK: u32 = 0x3FF;
const DATA_MASK: u32 = 0xFF;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpiError {
    #[error("{field} out of range: {value} (max {max})")]
    OutOfRange {
        field: &'static str,
        value: u32,
        max: u32,
    },
    #[error("expected {expected} bits, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("SPI clock {hz} Hz exceeds the device maximum of {MAX_SPI_CLOCK_HZ} Hz")]
    ClockTooFast { hz: u64 },
    #[error("SPI clock must be non-zero")]
    ZeroClock,
    #[error("no LO divider entry configured for the {0:?} chain")]
    MissingEntry(Chain),
    #[error("frame does not match any configured LO divider command")]
    UnknownCommand,
}

/// A single register write transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SpiFrame {
    pub write: bool,
    /// Additional bytes following the first; 0 for a single-byte write.
    pub extra_byte_count: u8,
    /// 10-bit register address.
    pub register_address: u16,
    pub data: u8,
}

impl SpiFrame {
    /// Single-byte register write.
    pub fn write(register_address: u16, data: u8) -> Result<Self, SpiError> {
        let frame = SpiFrame {
            write: true,
            extra_byte_count: 0,
            register_address,
            data,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<(), SpiError> {
        if u32::from(self.extra_byte_count) > COUNT_MASK {
            return Err(SpiError::OutOfRange {
                field: "extra_byte_count",
                value: self.extra_byte_count.into(),
                max: COUNT_MASK,
            });
        }
        if u32::from(self.register_address) > ADDR_MASK {
            return Err(SpiError::OutOfRange {
                field: "register_address",
                value: self.register_address.into(),
                max: ADDR_MASK,
            });
        }
        Ok(())
    }

    /// The frame packed into the low 24 bits of a word.
    pub fn to_word(&self) -> Result<u32, SpiError> {
        self.validate()?;
        Ok((u32::from(self.write) << WRITE_SHIFT)
            | (u32::from(self.extra_byte_count) << COUNT_SHIFT)
            | (u32::from(self.register_address) << ADDR_SHIFT)
            | u32::from(self.data))
    }

    pub fn from_word(word: u32) -> Result<Self, SpiError> {
        if word >> FRAME_BITS != 0 {
            return Err(SpiError::Malformed(format!(
                "word {word:#x} wider than {FRAME_BITS} bits"
            )));
        }
        let reserved = (word >> RESERVED_SHIFT) & RESERVED_MASK;
        if reserved != 0 {
            return Err(SpiError::Malformed(format!(
                "reserved bits set ({reserved:#04b})"
            )));
        }
        Ok(SpiFrame {
            write: (word >> WRITE_SHIFT) & 1 == 1,
            extra_byte_count: ((word >> COUNT_SHIFT) & COUNT_MASK) as u8,
            register_address: ((word >> ADDR_SHIFT) & ADDR_MASK) as u16,
            data: (word & DATA_MASK) as u8,
        })
    }

    /// Six upper-case hex digits, MSB first.
    pub fn to_hex(&self) -> Result<String, SpiError> {
        Ok(format!("{:06X}", self.to_word()?))
    }

    pub fn from_hex(hex: &str) -> Result<Self, SpiError> {
        if hex.len() != 6 {
            return Err(SpiError::Length {
                expected: 6,
                actual: hex.len(),
            });
        }
        let word = u32::from_str_radix(hex, 16)
            .map_err(|e| SpiError::Malformed(format!("bad hex {hex:?}: {e}")))?;
        Self::from_word(word)
    }

    /// Three bytes, first transmitted byte first.
    pub fn to_bytes(&self) -> Result<[u8; 3], SpiError> {
        let w = self.to_word()?.to_be_bytes();
        Ok([w[1], w[2], w[3]])
    }

    pub fn from_bytes(bytes: [u8; 3]) -> Result<Self, SpiError> {
        Self::from_word(u32::from_be_bytes([0, bytes[0], bytes[1], bytes[2]]))
    }
}

/// Bits in transmission order; the first element goes out first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSequence(Vec<bool>);

impl BitSequence {
    pub fn new(bits: Vec<bool>) -> Self {
        BitSequence(bits)
    }

    /// Build from `0`/`1` values.
    pub fn from_u8s(bits: &[u8]) -> Result<Self, SpiError> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(SpiError::Malformed(format!("bit value {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitSequence)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn encode_frame(frame: &SpiFrame) -> Result<BitSequence, SpiError> {
    let word = frame.to_word()?;
    let bits = (0..FRAME_BITS)
        .rev()
        .map(|i| (word >> i) & 1 == 1)
        .collect();
    Ok(BitSequence(bits))
}

pub fn decode_frame(bits: &BitSequence) -> Result<SpiFrame, SpiError> {
    if bits.len() != FRAME_BITS {
        return Err(SpiError::Length {
            expected: FRAME_BITS,
            actual: bits.len(),
        });
    }
    let word = bits
        .bits()
        .iter()
        .fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
    SpiFrame::from_word(word)
}

/// Time on the wire for one single-register write.
pub fn frame_duration(clocks: &ClockConfig) -> Result<TimeSpan, SpiError> {
    let hz = clocks.spi_clock_hz;
    if hz == 0 {
        return Err(SpiError::ZeroClock);
    }
    if hz > MAX_SPI_CLOCK_HZ && !clocks.allow_spi_overclock {
        return Err(SpiError::ClockTooFast { hz });
    }
    TimeSpan::from_cycles(FRAME_BITS as u64, hz).ok_or(SpiError::ZeroClock)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Chain {
    Tx,
    Rx,
}

/// Register and data patterns that switch one chain's LO divider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoDividerEntry {
    pub register: u16,
    pub on_value: u8,
    pub off_value: u8,
}

/// Per-chain LO divider register map.
///
/// The defaults (register 0x005, on = 0x00, off = 0x01, Tx only) are
/// placeholders, not values taken from the transceiver's register map.
/// Override them before driving real hardware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoDividerConfig {
    pub tx: Option<LoDividerEntry>,
    pub rx: Option<LoDividerEntry>,
}

impl Default for LoDividerConfig {
    fn default() -> Self {
        LoDividerConfig {
            tx: Some(LoDividerEntry {
                register: 0x005,
                on_value: 0x00,
                off_value: 0x01,
            }),
            rx: None,
        }
    }
}

impl LoDividerConfig {
    pub fn entry(&self, chain: Chain) -> Option<&LoDividerEntry> {
        match chain {
            Chain::Tx => self.tx.as_ref(),
            Chain::Rx => self.rx.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LoDividerCommand {
    pub chain: Chain,
    pub power_on: bool,
}

pub fn lo_divider_command(
    chain: Chain,
    power_on: bool,
    config: &LoDividerConfig,
) -> Result<SpiFrame, SpiError> {
    let entry = config.entry(chain).ok_or(SpiError::MissingEntry(chain))?;
    let data = if power_on {
        entry.on_value
    } else {
        entry.off_value
    };
    SpiFrame::write(entry.register, data)
}

/// Recover the command a frame encodes under `config`.
///
/// Tx is matched before Rx, so a configuration that gives both chains the
/// same register and pattern decodes as Tx.
pub fn decode_lo_command(
    frame: &SpiFrame,
    config: &LoDividerConfig,
) -> Result<LoDividerCommand, SpiError> {
    if !frame.write || frame.extra_byte_count != 0 {
        return Err(SpiError::UnknownCommand);
    }
    for chain in [Chain::Tx, Chain::Rx] {
        let Some(entry) = config.entry(chain) else {
            continue;
        };
        if entry.register != frame.register_address {
            continue;
        }
        if frame.data == entry.on_value {
            return Ok(LoDividerCommand {
                chain,
                power_on: true,
            });
        }
        if frame.data == entry.off_value {
            return Ok(LoDividerCommand {
                chain,
                power_on: false,
            });
        }
    }
    Err(SpiError::UnknownCommand)
}
