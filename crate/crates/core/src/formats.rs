//! Binary floating-point formats: field layout, bit-level decode/encode and
//! an order-preserving integer key.
//!
//! All words are carried in a `u32`; 16-bit formats occupy the low half.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("invalid format: exponent_bits={exponent_bits}, mantissa_bits={mantissa_bits}")]
    InvalidFormat { exponent_bits: u32, mantissa_bits: u32 },
    #[error("NaN has no position in the total order")]
    NaNKey,
    #[error("significand {significand:#x} is neither zero nor normalized to {mantissa_bits}+1 bits")]
    NotNormalized { significand: u64, mantissa_bits: u32 },
    #[error("cannot parse {0:?} as a floating-point literal")]
    Literal(String),
    #[error("unknown format preset {0:?} (expected fp32, fp16 or bf16)")]
    UnknownPreset(String),
}

/// Sign/exponent/mantissa widths of an IEEE-754-style binary format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FpFormat {
    exponent_bits: u32,
    mantissa_bits: u32,
}

impl FpFormat {
    pub const FP32: FpFormat = FpFormat { exponent_bits: 8, mantissa_bits: 23 };
    pub const FP16: FpFormat = FpFormat { exponent_bits: 5, mantissa_bits: 10 };
    pub const BF16: FpFormat = FpFormat { exponent_bits: 8, mantissa_bits: 7 };

    /// Custom format. Total width must be 16 or 32 bits.
    pub fn new(exponent_bits: u32, mantissa_bits: u32) -> Result<Self, FormatError> {
        let total = 1 + exponent_bits + mantissa_bits;
        if !(2..=11).contains(&exponent_bits) || mantissa_bits < 1 || !(total == 16 || total == 32) {
            return Err(FormatError::InvalidFormat { exponent_bits, mantissa_bits });
        }
        Ok(FpFormat { exponent_bits, mantissa_bits })
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    pub fn bias(&self) -> i32 {
        (1 << (self.exponent_bits - 1)) - 1
    }

    pub fn total_bits(&self) -> u32 {
        1 + self.exponent_bits + self.mantissa_bits
    }

    pub fn word_bytes(&self) -> usize {
        (self.total_bits() / 8) as usize
    }

    pub fn word_mask(&self) -> u32 {
        if self.total_bits() == 32 {
            u32::MAX
        } else {
            (1u32 << self.total_bits()) - 1
        }
    }

    pub fn sign_mask(&self) -> u32 {
        1u32 << (self.total_bits() - 1)
    }

    pub fn fraction_mask(&self) -> u32 {
        (1u32 << self.mantissa_bits) - 1
    }

    /// The all-ones exponent field (Inf/NaN).
    pub fn exponent_field_max(&self) -> u32 {
        (1u32 << self.exponent_bits) - 1
    }

    /// Largest unbiased exponent of a finite value.
    pub fn max_exponent(&self) -> i32 {
        self.bias()
    }

    /// Smallest unbiased exponent of a normal value.
    pub fn min_exponent(&self) -> i32 {
        1 - self.bias()
    }

    pub fn name(&self) -> &'static str {
        match *self {
            FpFormat::FP32 => "fp32",
            FpFormat::FP16 => "fp16",
            FpFormat::BF16 => "bf16",
            _ => "custom",
        }
    }

    /// Converts an `f64` to this format, rounding to nearest with ties to even.
    /// Produces subnormals and infinities the way IEEE-754 conversion does.
    pub fn from_f64(&self, value: f64) -> u32 {
        let m = self.mantissa_bits;
        let sign = if value.is_sign_negative() { self.sign_mask() } else { 0 };
        if value.is_nan() {
            return (self.exponent_field_max() << m) | (1 << (m - 1));
        }
        if value.is_infinite() {
            return sign | (self.exponent_field_max() << m);
        }
        if value == 0.0 {
            return sign;
        }
        if *self == FpFormat::FP32 {
            return (value as f32).to_bits();
        }

        // |value| = sig * 2^exp2 with sig in [2^52, 2^53)
        let raw = value.abs().to_bits();
        let field = (raw >> 52) as i64;
        let (mut sig, mut exp2) = if field == 0 {
            (raw & ((1 << 52) - 1), -1074i64)
        } else {
            ((raw & ((1 << 52) - 1)) | (1 << 52), field - 1075)
        };
        while sig < (1 << 52) {
            sig <<= 1;
            exp2 -= 1;
        }
        let unbiased = exp2 + 52;
        let lsb = unbiased.max(self.min_exponent() as i64) - m as i64;
        let shift = (lsb - exp2) as u32;
        let q = if shift >= 64 {
            // Far below the smallest subnormal; only the sticky bit survives.
            0
        } else {
            let q = sig >> shift;
            let rem = sig & ((1u64 << shift) - 1);
            let half = 1u64 << (shift - 1);
            if rem > half || (rem == half && q & 1 == 1) {
                q + 1
            } else {
                q
            }
        };
        let bits = if unbiased < self.min_exponent() as i64 {
            q
        } else {
            (((unbiased + self.bias() as i64 - 1) as u64) << m) + q
        };
        let inf = (self.exponent_field_max() as u64) << m;
        sign | bits.min(inf) as u32
    }

    /// Exact conversion of a word of this format to `f64`.
    pub fn to_f64(&self, bits: u32) -> f64 {
        let d = decode(bits, *self);
        let mag = match d.class {
            FpClass::Zero => 0.0,
            FpClass::Inf => f64::INFINITY,
            FpClass::NaN => return f64::NAN,
            FpClass::Normal => {
                d.significand as f64 * 2f64.powi(d.biased_exponent as i32 - self.bias() - self.mantissa_bits as i32)
            }
            FpClass::Subnormal => d.significand as f64 * 2f64.powi(self.min_exponent() - self.mantissa_bits as i32),
        };
        match d.sign {
            Sign::Positive => mag,
            Sign::Negative => -mag,
        }
    }

    /// Parses a decimal literal into this format with round-to-nearest-even.
    ///
    /// FP32 parses directly; 16-bit formats go through `f64` first.
    pub fn parse_literal(&self, text: &str) -> Result<u32, FormatError> {
        let text = text.trim();
        if *self == FpFormat::FP32 {
            let v: f32 = text.parse().map_err(|_| FormatError::Literal(text.to_string()))?;
            return Ok(v.to_bits());
        }
        let v: f64 = text.parse().map_err(|_| FormatError::Literal(text.to_string()))?;
        Ok(self.from_f64(v))
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            "custom" => write!(f, "e{}m{}", self.exponent_bits, self.mantissa_bits),
            name => f.write_str(name),
        }
    }
}

impl FromStr for FpFormat {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" | "f32" => Ok(FpFormat::FP32),
            "fp16" | "f16" => Ok(FpFormat::FP16),
            "bf16" => Ok(FpFormat::BF16),
            _ => Err(FormatError::UnknownPreset(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn is_negative(self) -> bool {
        self == Sign::Negative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FpClass {
    Zero,
    Normal,
    Subnormal,
    Inf,
    NaN,
}

/// A word split into its fields. For normal values the implied leading one
/// is made explicit in `significand` (bit `m` set).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedFp {
    pub sign: Sign,
    pub biased_exponent: u32,
    pub significand: u32,
    pub class: FpClass,
}

impl DecodedFp {
    pub fn is_finite(&self) -> bool {
        !matches!(self.class, FpClass::Inf | FpClass::NaN)
    }
}

pub fn decode(bits: u32, fmt: FpFormat) -> DecodedFp {
    let bits = bits & fmt.word_mask();
    let m = fmt.mantissa_bits;
    let sign = if bits & fmt.sign_mask() != 0 { Sign::Negative } else { Sign::Positive };
    let biased_exponent = (bits >> m) & fmt.exponent_field_max();
    let fraction = bits & fmt.fraction_mask();
    let (significand, class) = match (biased_exponent, fraction) {
        (0, 0) => (0, FpClass::Zero),
        (0, f) => (f, FpClass::Subnormal),
        (e, 0) if e == fmt.exponent_field_max() => (0, FpClass::Inf),
        (e, f) if e == fmt.exponent_field_max() => (f, FpClass::NaN),
        (_, f) => (f | (1 << m), FpClass::Normal),
    };
    DecodedFp { sign, biased_exponent, significand, class }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundingMode {
    /// Truncation of two's-complement values; the only mode available without guard bits.
    TowardNegInf,
    NearestEven,
}

impl FromStr for RoundingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "towardneginf" | "floor" | "down" => Ok(RoundingMode::TowardNegInf),
            "nearesteven" | "rne" | "nearest" => Ok(RoundingMode::NearestEven),
            _ => Err(format!("unknown rounding mode {s:?}")),
        }
    }
}

/// Non-fatal range signal raised while packing a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodeSignal {
    ExponentOverflow,
    ExponentUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoded {
    pub bits: u32,
    pub signal: Option<EncodeSignal>,
}

/// Packs sign, unbiased exponent and an `(m+1)`-bit significand.
///
/// Exponents above the format range produce ±Inf with `ExponentOverflow`;
/// below it, ±0 with `ExponentUnderflow` (flush to zero).
pub fn encode(sign: Sign, unbiased_exponent: i32, significand: u64, fmt: FpFormat) -> Result<Encoded, FormatError> {
    let m = fmt.mantissa_bits;
    let sign_bits = if sign.is_negative() { fmt.sign_mask() } else { 0 };
    if significand == 0 {
        return Ok(Encoded { bits: sign_bits, signal: None });
    }
    if significand >> m != 1 {
        return Err(FormatError::NotNormalized { significand, mantissa_bits: m });
    }
    if unbiased_exponent > fmt.max_exponent() {
        return Ok(Encoded {
            bits: sign_bits | (fmt.exponent_field_max() << m),
            signal: Some(EncodeSignal::ExponentOverflow),
        });
    }
    if unbiased_exponent < fmt.min_exponent() {
        return Ok(Encoded { bits: sign_bits, signal: Some(EncodeSignal::ExponentUnderflow) });
    }
    let field = (unbiased_exponent + fmt.bias()) as u32;
    let bits = sign_bits | (field << m) | (significand as u32 & fmt.fraction_mask());
    Ok(Encoded { bits, signal: None })
}

/// Order-preserving key: for non-NaN `a`, `b`, `a < b` iff `key(a) < key(b)`.
///
/// Negative words are complemented, non-negative words get the sign bit set.
/// `-0` sorts immediately below `+0`.
pub fn monotone_key(bits: u32, fmt: FpFormat) -> Result<u32, FormatError> {
    let bits = bits & fmt.word_mask();
    if decode(bits, fmt).class == FpClass::NaN {
        return Err(FormatError::NaNKey);
    }
    Ok(if bits & fmt.sign_mask() != 0 {
        !bits & fmt.word_mask()
    } else {
        bits | fmt.sign_mask()
    })
}
