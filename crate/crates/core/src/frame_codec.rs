//! Bit-exact codec for the 112-byte synchrophasor measurement data frame.
//!
//! Layout (big-endian, offsets in bytes):
//!
//! | off | len | field                                        |
//! |-----|-----|----------------------------------------------|
//! |   0 |   2 | sync word `0xAA01`                           |
//! |   2 |   2 | frame size, always 112                       |
//! |   4 |   2 | PMU id code                                  |
//! |   6 |   4 | SOC (seconds of century)                     |
//! |  10 |   4 | fraction-of-second, time quality in top byte |
//! |  14 |   2 | status word, bit 15 = anomaly flag           |
//! |  16 |  80 | 10 phasors as (f32 real, f32 imag)           |
//! |  96 |   4 | frequency deviation, f32 Hz                  |
//! | 100 |   4 | ROCOF, f32 Hz/s                              |
//! | 104 |   4 | one analog channel, f32                      |
//! | 108 |   2 | one digital word                             |
//! | 110 |   2 | CRC-CCITT over bytes 0..110                  |

use thiserror::Error;

/// Encoded frame length in bytes.
pub const FRAME_LEN: usize = 112;

/// Data-frame sync word.
pub const SYNC_WORD: u16 = 0xAA01;

/// Status-word bit marking a fog-detected anomaly, for PDC-side auditing.
pub const STAT_ANOMALY_BIT: u16 = 1 << 15;

/// Number of phasor channels carried.
pub const PHASOR_COUNT: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("field {field} out of range: {detail}")]
    InvalidField {
        field: &'static str,
        detail: String,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad frame length: got {got} bytes, expected {FRAME_LEN}")]
    Length { got: usize },
    #[error("bad sync word 0x{got:04X}, expected 0x{SYNC_WORD:04X}")]
    Sync { got: u16 },
    #[error("bad frame size field {got}, expected {FRAME_LEN}")]
    FrameSize { got: u16 },
    #[error("checksum mismatch: frame carries 0x{carried:04X}, computed 0x{computed:04X}")]
    Crc { carried: u16, computed: u16 },
}

/// One measurement data frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFrame {
    pub sync: u16,
    pub frame_size: u16,
    pub id_code: u16,
    pub soc: u32,
    /// Raw fraction-of-second word; high byte carries time quality.
    pub frac_sec: u32,
    pub stat: u16,
    /// Rectangular phasors, (real, imag) per channel.
    pub phasors: [(f32, f32); PHASOR_COUNT],
    /// Frequency deviation from nominal, Hz.
    pub freq: f32,
    /// Rate of change of frequency, Hz/s.
    pub dfreq: f32,
    pub analog: f32,
    pub digital: u16,
}

impl DataFrame {
    pub fn new(id_code: u16, soc: u32, frac_sec: u32) -> Self {
        DataFrame {
            sync: SYNC_WORD,
            frame_size: FRAME_LEN as u16,
            id_code,
            soc,
            frac_sec,
            stat: 0,
            phasors: [(0.0, 0.0); PHASOR_COUNT],
            freq: 0.0,
            dfreq: 0.0,
            analog: 0.0,
            digital: 0,
        }
    }

    pub fn anomaly(&self) -> bool {
        self.stat & STAT_ANOMALY_BIT != 0
    }

    pub fn set_anomaly(&mut self, on: bool) {
        if on {
            self.stat |= STAT_ANOMALY_BIT;
        } else {
            self.stat &= !STAT_ANOMALY_BIT;
        }
    }
}

/// CRC-CCITT: polynomial 0x1021, initial value 0xFFFF, no reflection, no
/// final xor.
pub fn crc_ccitt(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            if crc & 0x8000 != 0 {
                crc = (crc << 1) ^ 0x1021;
            } else {
                crc <<= 1;
            }
        }
    }
    crc
}

/// Serialize a frame to its 112-byte wire form.
pub fn encode(frame: &DataFrame) -> Result<[u8; FRAME_LEN], EncodeError> {
    if frame.sync != SYNC_WORD {
        return Err(EncodeError::InvalidField {
            field: "sync",
            detail: format!("0x{:04X} != 0x{SYNC_WORD:04X}", frame.sync),
        });
    }
    if frame.frame_size != FRAME_LEN as u16 {
        return Err(EncodeError::InvalidField {
            field: "frame_size",
            detail: format!("{} != {FRAME_LEN}", frame.frame_size),
        });
    }
    let mut out = [0u8; FRAME_LEN];
    let mut at = 0usize;
    let mut put = |bytes: &[u8], out: &mut [u8; FRAME_LEN]| {
        out[at..at + bytes.len()].copy_from_slice(bytes);
        at += bytes.len();
    };
    put(&frame.sync.to_be_bytes(), &mut out);
    put(&frame.frame_size.to_be_bytes(), &mut out);
    put(&frame.id_code.to_be_bytes(), &mut out);
    put(&frame.soc.to_be_bytes(), &mut out);
    put(&frame.frac_sec.to_be_bytes(), &mut out);
    put(&frame.stat.to_be_bytes(), &mut out);
    for (re, im) in frame.phasors {
        put(&re.to_be_bytes(), &mut out);
        put(&im.to_be_bytes(), &mut out);
    }
    put(&frame.freq.to_be_bytes(), &mut out);
    put(&frame.dfreq.to_be_bytes(), &mut out);
    put(&frame.analog.to_be_bytes(), &mut out);
    put(&frame.digital.to_be_bytes(), &mut out);
    debug_assert_eq!(at, FRAME_LEN - 2);
    let crc = crc_ccitt(&out[..FRAME_LEN - 2]);
    out[FRAME_LEN - 2..].copy_from_slice(&crc.to_be_bytes());
    Ok(out)
}

/// Parse and verify a 112-byte frame: length, sync, size field, checksum.
pub fn decode(bytes: &[u8]) -> Result<DataFrame, DecodeError> {
    if bytes.len() != FRAME_LEN {
        return Err(DecodeError::Length { got: bytes.len() });
    }
    let u16_at = |at: usize| u16::from_be_bytes([bytes[at], bytes[at + 1]]);
    let u32_at = |at: usize| u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let f32_at = |at: usize| f32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);

    let sync = u16_at(0);
    if sync != SYNC_WORD {
        return Err(DecodeError::Sync { got: sync });
    }
    let frame_size = u16_at(2);
    if frame_size != FRAME_LEN as u16 {
        return Err(DecodeError::FrameSize { got: frame_size });
    }
    let carried = u16_at(FRAME_LEN - 2);
    let computed = crc_ccitt(&bytes[..FRAME_LEN - 2]);
    if carried != computed {
        return Err(DecodeError::Crc { carried, computed });
    }

    let mut phasors = [(0.0f32, 0.0f32); PHASOR_COUNT];
    for (i, slot) in phasors.iter_mut().enumerate() {
        let at = 16 + i * 8;
        *slot = (f32_at(at), f32_at(at + 4));
    }
    Ok(DataFrame {
        sync,
        frame_size,
        id_code: u16_at(4),
        soc: u32_at(6),
        frac_sec: u32_at(10),
        stat: u16_at(14),
        phasors,
        freq: f32_at(96),
        dfreq: f32_at(100),
        analog: f32_at(104),
        digital: u16_at(108),
    })
}
