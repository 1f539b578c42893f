//! The switch-internal floating-point representation and its addition,
//! renormalization and readout.
//!
//! A value lives in two registers: the biased exponent, and a signed
//! two's-complement mantissa register of width `R` holding the significand
//! (explicit leading one, shifted left by the guard bits). The register is
//! wider than the significand, so sums are kept denormalized and only
//! renormalized when read out:
//!
//! ```text
//!  R-1          m+G+1 m+G         G   0
//!  | sign | headroom |1| fraction |guard|
//! ```
//!
//! For every reachable state the arithmetic value is
//! `mantissa * 2^(exponent - bias - m - G)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{self, decode, EncodeSignal, FpClass, FpFormat, RoundingMode, Sign};
use crate::lpm::{clz_lpm, shared_table};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("non-finite input {bits:#x}")]
    NonFiniteInput { bits: u32 },
    #[error("register width {0} unsupported (expected 16 or 32)")]
    RegisterWidth(u32),
    #[error("{guard_bits} guard bits unsupported (at most 3)")]
    GuardBits { guard_bits: u32 },
    #[error("no headroom: {width}-bit register cannot hold a {mantissa_bits}-bit mantissa with {guard_bits} guard bits")]
    NoHeadroom { width: u32, mantissa_bits: u32, guard_bits: u32 },
    #[error("rounding mode {0:?} needs at least one guard bit")]
    RoundingUnavailable(RoundingMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Shifts the stored mantissa when the incoming exponent is larger
    /// (needs a read-shift-add-write stateful unit).
    Exact,
    /// Never shifts the stored mantissa: left-shifts the incoming one into
    /// the headroom, or overwrites when the gap exceeds the headroom.
    Approx,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Variant::Exact),
            "approx" | "approximate" => Ok(Variant::Approx),
            _ => Err(format!("unknown variant {s:?} (expected exact or approx)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Exact => "exact",
            Variant::Approx => "approx",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FpisaConfig {
    pub format: FpFormat,
    pub register_width: u32,
    pub guard_bits: u32,
    pub variant: Variant,
}

impl FpisaConfig {
    /// 32-bit register, no guard bits.
    pub fn new(format: FpFormat, variant: Variant) -> Self {
        FpisaConfig { format, register_width: 32, guard_bits: 0, variant }
    }

    pub fn fp32(variant: Variant) -> Self {
        Self::new(FpFormat::FP32, variant)
    }

    pub fn with_register_width(mut self, width: u32) -> Self {
        self.register_width = width;
        self
    }

    pub fn with_guard_bits(mut self, guard_bits: u32) -> Self {
        self.guard_bits = guard_bits;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), ArithError> {
        if !matches!(self.register_width, 16 | 32) {
            return Err(ArithError::RegisterWidth(self.register_width));
        }
        if self.guard_bits > 3 {
            return Err(ArithError::GuardBits { guard_bits: self.guard_bits });
        }
        let used = self.format.mantissa_bits() + 2 + self.guard_bits;
        if self.register_width <= used {
            return Err(ArithError::NoHeadroom {
                width: self.register_width,
                mantissa_bits: self.format.mantissa_bits(),
                guard_bits: self.guard_bits,
            });
        }
        Ok(())
    }

    /// Spare high-order bits between the significand and the sign bit.
    pub fn headroom(&self) -> u32 {
        self.register_width - (self.format.mantissa_bits() + 1) - 1 - self.guard_bits
    }

    /// Bit index (from the LSB) of the leading one of a canonical mantissa.
    pub fn canonical_leading_bit(&self) -> u32 {
        self.format.mantissa_bits() + self.guard_bits
    }

    /// Leading-zero count of a canonical mantissa magnitude.
    pub fn canonical_leading_zeros(&self) -> u32 {
        self.register_width - 1 - self.canonical_leading_bit()
    }

    /// Exclusive bound on the mantissa magnitude.
    pub fn mantissa_limit(&self) -> i64 {
        1i64 << (self.register_width - 1)
    }

    /// Readout mode used by the built-in programs and the engines:
    /// truncation without guard bits, nearest-even with them.
    pub fn default_rounding(&self) -> RoundingMode {
        if self.guard_bits == 0 {
            RoundingMode::TowardNegInf
        } else {
            RoundingMode::NearestEven
        }
    }

    fn fits(&self, v: i128) -> bool {
        let limit = self.mantissa_limit() as i128;
        -limit < v && v < limit
    }
}

/// Exponent and mantissa registers of one accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FpisaValue {
    pub exponent: u32,
    pub mantissa: i64,
}

impl FpisaValue {
    pub const ZERO: FpisaValue = FpisaValue { exponent: 0, mantissa: 0 };

    pub fn new(exponent: u32, mantissa: i64) -> Self {
        FpisaValue { exponent, mantissa }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0
    }

    /// Power of two that one mantissa unit stands for.
    pub fn scale(&self, cfg: &FpisaConfig) -> i64 {
        self.exponent as i64 - cfg.format.bias() as i64 - cfg.canonical_leading_bit() as i64
    }

    /// The mantissa as an `R`-bit two's-complement register word.
    pub fn register_word(&self, cfg: &FpisaConfig) -> u64 {
        (self.mantissa as u64) & low_mask(cfg.register_width)
    }

    /// Approximate real value; exact whenever it fits an `f64`.
    pub fn to_f64(&self, cfg: &FpisaConfig) -> f64 {
        self.mantissa as f64 * 2f64.powi(self.scale(cfg) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AddEvent {
    None,
    /// A right shift discarded set bits; `bits_lost` counts them.
    RoundingLoss { bits_lost: u32 },
    /// The approximate variant replaced a nonzero state.
    Overwrite { discarded: FpisaValue },
    /// The sum did not fit the mantissa register; the state was left unchanged.
    HeadroomOverflow,
}

impl AddEvent {
    pub fn is_none(&self) -> bool {
        matches!(self, AddEvent::None)
    }

    pub fn label(&self) -> &'static str {
        match self {
            AddEvent::None => "none",
            AddEvent::RoundingLoss { .. } => "rounding",
            AddEvent::Overwrite { .. } => "overwrite",
            AddEvent::HeadroomOverflow => "headroom_overflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddOutcome {
    pub state: FpisaValue,
    pub event: AddEvent,
}

fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Arithmetic right shift with the count of set bits it discards.
/// Distances past the word saturate to 0 or -1.
fn shift_right(value: i64, distance: u64) -> (i64, u32) {
    if distance == 0 {
        return (value, 0);
    }
    let shifted = value >> distance.min(63);
    let lost = if distance >= 64 {
        if value < 0 {
            // infinitely many sign bits shifted out
            u32::MAX
        } else {
            value.count_ones()
        }
    } else {
        (value as u64 & low_mask(distance as u32)).count_ones()
    };
    (shifted, lost)
}

/// Converts a word to the register representation. Subnormals flush to zero.
pub fn to_fpisa(bits: u32, cfg: &FpisaConfig) -> Result<FpisaValue, ArithError> {
    let d = decode(bits, cfg.format);
    match d.class {
        FpClass::Zero | FpClass::Subnormal => Ok(FpisaValue::ZERO),
        FpClass::Inf | FpClass::NaN => Err(ArithError::NonFiniteInput { bits }),
        FpClass::Normal => {
            let magnitude = (d.significand as i64) << cfg.guard_bits;
            let mantissa = if d.sign.is_negative() { -magnitude } else { magnitude };
            Ok(FpisaValue { exponent: d.biased_exponent, mantissa })
        }
    }
}

fn finish_add(state: FpisaValue, exponent: u32, sum: i128, lost: u32, cfg: &FpisaConfig) -> AddOutcome {
    if !cfg.fits(sum) {
        return AddOutcome { state, event: AddEvent::HeadroomOverflow };
    }
    let event = if lost > 0 { AddEvent::RoundingLoss { bits_lost: lost } } else { AddEvent::None };
    AddOutcome { state: FpisaValue { exponent, mantissa: sum as i64 }, event }
}

/// Adds with whichever variant `cfg` selects.
pub fn add(state: FpisaValue, incoming: FpisaValue, cfg: &FpisaConfig) -> AddOutcome {
    match cfg.variant {
        Variant::Exact => add_exact(state, incoming, cfg),
        Variant::Approx => add_approx(state, incoming, cfg),
    }
}

/// Aligns the operand with the smaller exponent by an arithmetic right
/// shift (the stored mantissa when the incoming exponent is larger) and adds.
pub fn add_exact(state: FpisaValue, incoming: FpisaValue, cfg: &FpisaConfig) -> AddOutcome {
    let gap = incoming.exponent as i64 - state.exponent as i64;
    if gap <= 0 {
        let (aligned, lost) = shift_right(incoming.mantissa, gap.unsigned_abs());
        finish_add(state, state.exponent, state.mantissa as i128 + aligned as i128, lost, cfg)
    } else {
        let (aligned, lost) = shift_right(state.mantissa, gap as u64);
        finish_add(state, incoming.exponent, aligned as i128 + incoming.mantissa as i128, lost, cfg)
    }
}

/// Never touches the stored mantissa's alignment. A zero-exponent state is
/// treated as empty and simply replaced.
pub fn add_approx(state: FpisaValue, incoming: FpisaValue, cfg: &FpisaConfig) -> AddOutcome {
    let gap = incoming.exponent as i64 - state.exponent as i64;
    if state.exponent == 0 || gap > cfg.headroom() as i64 {
        let event = if state.is_zero() { AddEvent::None } else { AddEvent::Overwrite { discarded: state } };
        return AddOutcome { state: incoming, event };
    }
    if gap <= 0 {
        let (aligned, lost) = shift_right(incoming.mantissa, gap.unsigned_abs());
        finish_add(state, state.exponent, state.mantissa as i128 + aligned as i128, lost, cfg)
    } else {
        let shifted = (incoming.mantissa as i128) << gap;
        finish_add(state, state.exponent, state.mantissa as i128 + shifted, 0, cfg)
    }
}

/// A normalized result ready for packing. Zero has `significand == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Renormalized {
    pub sign: Sign,
    pub unbiased_exponent: i32,
    pub significand: u64,
}

impl Renormalized {
    pub const ZERO: Renormalized = Renormalized { sign: Sign::Positive, unbiased_exponent: 0, significand: 0 };

    pub fn is_zero(&self) -> bool {
        self.significand == 0
    }
}

fn check_rounding(cfg: &FpisaConfig, rounding: RoundingMode) -> Result<(), ArithError> {
    if rounding == RoundingMode::NearestEven && cfg.guard_bits == 0 {
        return Err(ArithError::RoundingUnavailable(rounding));
    }
    Ok(())
}

/// Moves the leading one of the mantissa magnitude to bit `m` (dropping the
/// guard bits) and adjusts the exponent. Does not modify `state`.
///
/// The leading-zero count comes from the LPM table. Under `TowardNegInf`
/// negative magnitudes round up, so the result never exceeds the state value.
pub fn renormalize(state: &FpisaValue, cfg: &FpisaConfig, rounding: RoundingMode) -> Result<Renormalized, ArithError> {
    check_rounding(cfg, rounding)?;
    if state.is_zero() {
        return Ok(Renormalized::ZERO);
    }
    let m = cfg.format.mantissa_bits();
    let sign = if state.mantissa < 0 { Sign::Negative } else { Sign::Positive };
    let magnitude = state.mantissa.unsigned_abs();
    let lz = clz_lpm(magnitude, shared_table(cfg.register_width));
    let mut unbiased =
        state.exponent as i32 - cfg.format.bias() + cfg.canonical_leading_zeros() as i32 - lz as i32;
    // leading one at bit p; keep p..p-m
    let p = (cfg.register_width - 1 - lz) as i32;
    let drop = p - m as i32;
    let mut significand = if drop <= 0 {
        magnitude << (-drop)
    } else {
        let drop = drop as u32;
        let kept = magnitude >> drop;
        let rem = magnitude & low_mask(drop);
        let round_up = match rounding {
            RoundingMode::TowardNegInf => sign.is_negative() && rem != 0,
            RoundingMode::NearestEven => {
                let half = 1u64 << (drop - 1);
                rem > half || (rem == half && kept & 1 == 1)
            }
        };
        kept + round_up as u64
    };
    if significand == 1 << (m + 1) {
        significand >>= 1;
        unbiased += 1;
    }
    Ok(Renormalized { sign, unbiased_exponent: unbiased, significand })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Readout {
    pub bits: u32,
    pub signal: Option<EncodeSignal>,
}

/// Renormalizes and packs the state into a word of the configured format.
pub fn readout(state: &FpisaValue, cfg: &FpisaConfig, rounding: RoundingMode) -> Result<Readout, ArithError> {
    let r = renormalize(state, cfg, rounding)?;
    let e = formats::encode(r.sign, r.unbiased_exponent, r.significand, cfg.format)
        .expect("renormalize yields a normalized significand");
    Ok(Readout { bits: e.bits, signal: e.signal })
}

/// Whether `n_ops` same-exponent additions of the largest mantissa fit the
/// register without overflow.
pub fn check_overflow_capacity(cfg: &FpisaConfig, n_ops: u64) -> bool {
    let max_mantissa = ((1u128 << (cfg.format.mantissa_bits() + 1)) - 1) << cfg.guard_bits;
    (n_ops as u128) * max_mantissa < 1u128 << (cfg.register_width - 1)
}

/// Largest `n_ops` for which [`check_overflow_capacity`] holds.
pub fn overflow_capacity(cfg: &FpisaConfig) -> u64 {
    let max_mantissa = ((1u128 << (cfg.format.mantissa_bits() + 1)) - 1) << cfg.guard_bits;
    (((1u128 << (cfg.register_width - 1)) - 1) / max_mantissa) as u64
}
