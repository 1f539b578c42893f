//! Wire frames. All multi-byte fields and payload words are big-endian.
//!
//! ```text
//! offset  size  field
//!      0     2  magic 0xF9 0x1A
//!      2     1  version (1)
//!      3     1  kind: 1 contribute, 2 result, 3 ack, 4 error
//!      4     4  slot
//!      8     2  worker
//!     10     2  generation
//!     12     2  count
//!     14     .  count words of total_bits/8 bytes each
//! ```
//!
//! Error frames carry one payload word holding an [`ErrorReason`] code.

use serde::Serialize;
use thiserror::Error;

use crate::formats::FpFormat;

pub const MAGIC: [u8; 2] = [0xF9, 0x1A];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[repr(u8)]
pub enum FrameKind {
    Contribute = 1,
    Result = 2,
    Ack = 3,
    Error = 4,
}

impl TryFrom<u8> for FrameKind {
    type Error = FrameError;

    fn try_from(b: u8) -> Result<Self, FrameError> {
        Ok(match b {
            1 => FrameKind::Contribute,
            2 => FrameKind::Result,
            3 => FrameKind::Ack,
            4 => FrameKind::Error,
            _ => return Err(FrameError::BadKind(b)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[repr(u32)]
pub enum ErrorReason {
    Malformed = 1,
    SlotOutOfRange = 2,
    WorkerOutOfRange = 3,
    CountMismatch = 4,
    NonFinite = 5,
    UnexpectedKind = 6,
    GenerationMismatch = 7,
}

impl ErrorReason {
    pub fn from_code(code: u32) -> Option<Self> {
        use ErrorReason::*;
        [Malformed, SlotOutOfRange, WorkerOutOfRange, CountMismatch, NonFinite, UnexpectedKind, GenerationMismatch]
            .into_iter()
            .find(|r| *r as u32 == code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame shorter than its header or payload ({0} bytes)")]
    Truncated(usize),
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown frame kind {0}")]
    BadKind(u8),
    #[error("payload is {actual} bytes, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub kind: FrameKind,
    pub slot: u32,
    pub worker: u16,
    pub generation: u16,
    /// Host-order words of the session format.
    pub words: Vec<u32>,
}

impl Frame {
    pub fn contribute(slot: u32, worker: u16, generation: u16, words: Vec<u32>) -> Self {
        Frame { kind: FrameKind::Contribute, slot, worker, generation, words }
    }

    pub fn error(slot: u32, worker: u16, generation: u16, reason: ErrorReason) -> Self {
        Frame { kind: FrameKind::Error, slot, worker, generation, words: vec![reason as u32] }
    }

    /// Reason code of an error frame.
    pub fn reason(&self) -> Option<ErrorReason> {
        (self.kind == FrameKind::Error).then(|| self.words.first().and_then(|&c| ErrorReason::from_code(c))).flatten()
    }

    fn word_bytes(&self, fmt: FpFormat) -> usize {
        // error codes always travel as 32-bit words
        if self.kind == FrameKind::Error {
            4
        } else {
            fmt.word_bytes()
        }
    }

    pub fn encode(&self, fmt: FpFormat) -> Vec<u8> {
        let wb = self.word_bytes(fmt);
        let mut out = Vec::with_capacity(HEADER_LEN + wb * self.words.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.slot.to_be_bytes());
        out.extend_from_slice(&self.worker.to_be_bytes());
        out.extend_from_slice(&self.generation.to_be_bytes());
        out.extend_from_slice(&(self.words.len() as u16).to_be_bytes());
        for &w in &self.words {
            out.extend_from_slice(&w.to_be_bytes()[4 - wb..]);
        }
        out
    }

    pub fn decode(bytes: &[u8], fmt: FpFormat) -> Result<Frame, FrameError> {
        if bytes.len() < HEADER_LEN {
            return Err(FrameError::Truncated(bytes.len()));
        }
        let magic = [bytes[0], bytes[1]];
        if magic != MAGIC {
            return Err(FrameError::BadMagic(magic));
        }
        if bytes[2] != VERSION {
            return Err(FrameError::BadVersion(bytes[2]));
        }
        let kind = FrameKind::try_from(bytes[3])?;
        let u16_at = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
        let slot = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        let worker = u16_at(8);
        let generation = u16_at(10);
        let count = u16_at(12) as usize;
        let mut frame = Frame { kind, slot, worker, generation, words: Vec::with_capacity(count) };
        let wb = frame.word_bytes(fmt);
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != count * wb {
            return Err(FrameError::LengthMismatch { expected: count * wb, actual: payload.len() });
        }
        frame.words = payload
            .chunks_exact(wb)
            .map(|c| c.iter().fold(0u32, |acc, &b| (acc << 8) | b as u32))
            .collect();
        Ok(frame)
    }
}
