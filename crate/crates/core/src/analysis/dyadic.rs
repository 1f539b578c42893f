//! Exact dyadic rationals `mantissa × 2^exponent` over big integers.
//!
//! Kept independent of the register arithmetic so it can serve as an oracle
//! for it.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign as BigSign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::formats::{decode, FpClass, FpFormat, RoundingMode};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    /// Odd, or zero with `exponent == 0`.
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { mantissa: BigInt::zero(), exponent: 0 }
    }

    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        if mantissa.is_zero() {
            return Self::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        Dyadic { mantissa: mantissa >> tz, exponent: exponent + tz as i64 }
    }

    pub fn from_i64(mantissa: i64, exponent: i64) -> Self {
        Self::new(BigInt::from(mantissa), exponent)
    }

    /// Exact value of a finite word; `None` for Inf and NaN.
    pub fn from_word(bits: u32, fmt: FpFormat) -> Option<Self> {
        let d = decode(bits, fmt);
        let m = fmt.mantissa_bits() as i64;
        let (sig, exp) = match d.class {
            FpClass::Zero => return Some(Self::zero()),
            FpClass::Inf | FpClass::NaN => return None,
            FpClass::Normal => (d.significand as i64, d.biased_exponent as i64 - fmt.bias() as i64 - m),
            // subnormals: no implied one, exponent of the smallest normal
            FpClass::Subnormal => ((bits & fmt.fraction_mask()) as i64, 1 - fmt.bias() as i64 - m),
        };
        let sig = if d.sign.is_negative() { -sig } else { sig };
        Some(Self::from_i64(sig, exp))
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn abs(&self) -> Self {
        Dyadic { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    pub fn neg(&self) -> Self {
        Dyadic { mantissa: -&self.mantissa, exponent: self.exponent }
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as u64;
        let b = &other.mantissa << (other.exponent - e) as u64;
        Self::new(a + b, e)
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        self.add(&other.neg())
    }

    /// Largest multiple of `2^k` not above the value.
    pub fn floor_to(&self, k: i64) -> Dyadic {
        if self.exponent >= k {
            return self.clone();
        }
        Self::new(&self.mantissa >> (k - self.exponent) as u64, k)
    }

    /// Nearest `f64` (exact when representable).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits() as i64;
        // keep 64 significant bits; the f64 conversion rounds the rest
        let shift = (bits - 64).max(0);
        let m = (&self.mantissa >> shift as u64).to_f64().unwrap_or(0.0);
        let e = self.exponent + shift;
        let half = e / 2;
        m * 2f64.powi(half.clamp(-2000, 2000) as i32) * 2f64.powi((e - half).clamp(-2000, 2000) as i32)
    }

    /// Rounds to `fmt` with `rounding`. Results past the largest finite
    /// value become infinities; results below the smallest normal flush to
    /// a signed zero. Zero reads out as +0.
    pub fn round_to_format(&self, fmt: FpFormat, rounding: RoundingMode) -> u32 {
        if self.is_zero() {
            return 0;
        }
        let negative = self.is_negative();
        let mag = self.mantissa.abs();
        let m = fmt.mantissa_bits() as i64;
        let len = mag.bits() as i64;
        let mut unbiased = self.exponent + len - 1;
        let drop = len - (m + 1);
        let mut kept = if drop <= 0 {
            mag << (-drop) as u64
        } else {
            let kept = &mag >> drop as u64;
            let rem = &mag - (&kept << drop as u64);
            let up = match rounding {
                RoundingMode::TowardNegInf => negative && !rem.is_zero(),
                RoundingMode::NearestEven => {
                    let half = BigInt::one() << (drop - 1) as u64;
                    match rem.cmp(&half) {
                        Ordering::Greater => true,
                        Ordering::Equal => kept.bit(0),
                        Ordering::Less => false,
                    }
                }
            };
            if up {
                kept + 1
            } else {
                kept
            }
        };
        if kept.bits() as i64 > m + 1 {
            kept >>= 1;
            unbiased += 1;
        }
        let sign = if negative { fmt.sign_mask() } else { 0 };
        let bias = fmt.bias() as i64;
        if unbiased > bias {
            return sign | (fmt.exponent_field_max() << fmt.mantissa_bits());
        }
        if unbiased < 1 - bias {
            return sign;
        }
        let frac = (kept.to_u64().expect("m+1 bits") as u32) & fmt.fraction_mask();
        sign | (((unbiased + bias) as u32) << fmt.mantissa_bits()) | frac
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.sub(other).mantissa.sign() {
            BigSign::Minus => Ordering::Less,
            BigSign::NoSign => Ordering::Equal,
            BigSign::Plus => Ordering::Greater,
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} * 2^{}", self.mantissa, self.exponent)
    }
}
