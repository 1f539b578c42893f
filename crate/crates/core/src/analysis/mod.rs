//! Exact oracles and the error and ratio statistics built on them.

pub mod dyadic;
pub mod histogram;
pub mod synthetic;

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::aggregation::{aggregate_vectors, AggregationError};
use crate::arith::{AddEvent, FpisaConfig, Variant};
use crate::exec::Exec;
use crate::formats::{decode, FpClass, FpFormat};

pub use dyadic::Dyadic;
pub use histogram::{ErrorClass, ErrorHistogram, RatioClass, RatioHistogram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("value {index} ({bits:#x}) is not finite")]
    NonFiniteInput { index: usize, bits: u32 },
    #[error("ratio analysis needs at least two workers")]
    TooFewWorkers,
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleModel {
    /// The mathematically exact sum.
    ExactRational,
    /// The configured variant's shift and truncation rules on an unbounded
    /// mantissa register: rounding without overwrite or overflow.
    TruncationModel(FpisaConfig),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleValue {
    Exact(Dyadic),
    Word(u32),
}

/// Exact sum of finite words.
pub fn exact_sum(values: &[u32], fmt: FpFormat) -> Result<Dyadic, AnalysisError> {
    values.iter().enumerate().try_fold(Dyadic::zero(), |acc, (index, &bits)| {
        Dyadic::from_word(bits, fmt).map(|d| acc.add(&d)).ok_or(AnalysisError::NonFiniteInput { index, bits })
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationSum {
    /// Readout with the configuration's default rounding.
    pub word: u32,
    /// Value of the unbounded accumulator before readout.
    pub value: Dyadic,
    /// Whether any alignment shift discarded set bits.
    pub lossy: bool,
}

/// Replays the variant's alignment rules with an unbounded mantissa.
///
/// Inputs are taken as the switch sees them: subnormals flush to zero and
/// normal values carry `G` guard bits. Exact: the operand with the smaller
/// exponent is floored to the larger one's unit. Approx: a zero-exponent
/// state takes the incoming value, larger incoming exponents are shifted
/// left without limit, smaller ones floored.
pub fn truncation_model_sum(values: &[u32], cfg: &FpisaConfig) -> Result<TruncationSum, AnalysisError> {
    let fmt = cfg.format;
    let g = cfg.guard_bits;
    let mut exp: i64 = 0;
    let mut mant = BigInt::from(0);
    let mut lossy = false;
    let floor_shift = |v: &BigInt, d: u64, lossy: &mut bool| {
        let shifted = v >> d;
        if &(&shifted << d) != v {
            *lossy = true;
        }
        shifted
    };
    for (index, &bits) in values.iter().enumerate() {
        let d = decode(bits, fmt);
        let (e_in, m_in) = match d.class {
            FpClass::Inf | FpClass::NaN => return Err(AnalysisError::NonFiniteInput { index, bits }),
            FpClass::Zero | FpClass::Subnormal => (0i64, BigInt::from(0)),
            FpClass::Normal => {
                let mag = BigInt::from(d.significand) << g;
                (d.biased_exponent as i64, if d.sign.is_negative() { -mag } else { mag })
            }
        };
        let gap = e_in - exp;
        match cfg.variant {
            Variant::Exact => {
                if gap <= 0 {
                    mant += floor_shift(&m_in, gap.unsigned_abs(), &mut lossy);
                } else {
                    mant = floor_shift(&mant, gap as u64, &mut lossy) + m_in;
                    exp = e_in;
                }
            }
            Variant::Approx => {
                if exp == 0 {
                    (exp, mant) = (e_in, m_in);
                } else if gap <= 0 {
                    mant += floor_shift(&m_in, gap.unsigned_abs(), &mut lossy);
                } else {
                    mant += m_in << gap as u64;
                }
            }
        }
    }
    let scale = exp - fmt.bias() as i64 - fmt.mantissa_bits() as i64 - g as i64;
    let value = Dyadic::new(mant, scale);
    Ok(TruncationSum { word: value.round_to_format(fmt, cfg.default_rounding()), value, lossy })
}

pub fn oracle_sum(values: &[u32], model: OracleModel, fmt: FpFormat) -> Result<OracleValue, AnalysisError> {
    match model {
        OracleModel::ExactRational => exact_sum(values, fmt).map(OracleValue::Exact),
        OracleModel::TruncationModel(cfg) => truncation_model_sum(values, &cfg).map(|t| OracleValue::Word(t.word)),
    }
}

/// Most severe class among an element's events.
pub fn classify(events: impl IntoIterator<Item = AddEvent>) -> Option<ErrorClass> {
    events
        .into_iter()
        .filter_map(|e| match e {
            AddEvent::HeadroomOverflow => Some(ErrorClass::HeadroomOverflow),
            AddEvent::Overwrite { .. } => Some(ErrorClass::Overwrite),
            AddEvent::RoundingLoss { .. } => Some(ErrorClass::Rounding),
            AddEvent::None => None,
        })
        .min()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub histogram: ErrorHistogram,
    /// Aggregated words, for callers that also want the result.
    #[serde(skip)]
    pub result: Vec<u32>,
}

/// Aggregates the vectors and buckets each element's absolute error
/// against the exact sum. An element's nonzero error takes the most severe
/// class among its events, or rounding if it has none.
pub fn error_distribution(vectors: &[Vec<u32>], cfg: &FpisaConfig, exec: Exec) -> Result<ErrorReport, AnalysisError> {
    let agg = aggregate_vectors(vectors, cfg, exec)?;
    let fmt = cfg.format;
    let len = agg.result.len();
    let mut starts = vec![0usize; len + 1];
    for ev in &agg.events {
        starts[ev.element + 1] += 1;
    }
    for i in 0..len {
        starts[i + 1] += starts[i];
    }
    let per_element = exec.map_range(len, |e| {
        let exact = vectors.iter().fold(Dyadic::zero(), |acc, v| {
            acc.add(&Dyadic::from_word(v[e], fmt).expect("aggregation checked finiteness"))
        });
        let got = agg.result[e];
        let err = if decode(got, fmt).is_finite() {
            Dyadic::from_word(got, fmt).expect("finite").sub(&exact).abs().to_f64()
        } else {
            f64::INFINITY
        };
        let class = classify(agg.events[starts[e]..starts[e + 1]].iter().map(|ev| ev.event));
        (err, class)
    });
    let mut histogram = ErrorHistogram::default();
    for (err, class) in per_element {
        histogram.record(err, class);
    }
    Ok(ErrorReport { histogram, result: agg.result })
}

/// `floor(log2(a / b))` for positive finite `a`, `b`, exactly.
fn floor_log2_ratio(a: f64, b: f64) -> i64 {
    let parts = |x: f64| {
        let bits = x.to_bits();
        let e = ((bits >> 52) & 0x7FF) as i64 - 1023;
        (e, bits & ((1 << 52) - 1))
    };
    let (ea, fa) = parts(a);
    let (eb, fb) = parts(b);
    ea - eb - (fa < fb) as i64
}

/// Per element, `max|v| / min|v|` over workers, bucketed by `floor(log2)`.
pub fn ratio_distribution(vectors: &[Vec<u32>], fmt: FpFormat, exec: Exec) -> Result<RatioHistogram, AnalysisError> {
    if vectors.len() < 2 {
        return Err(AnalysisError::TooFewWorkers);
    }
    let len = vectors[0].len();
    if let Some((worker, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != len) {
        return Err(AggregationError::LengthMismatch { worker, len: v.len(), expected: len }.into());
    }
    let classes = exec.map_range(len, |e| {
        let mut zeros = 0;
        let (mut lo, mut hi) = (f64::INFINITY, 0f64);
        for v in vectors {
            let bits = v[e];
            if !decode(bits, fmt).is_finite() {
                return Err(AnalysisError::NonFiniteInput { index: e, bits });
            }
            let m = fmt.to_f64(bits).abs();
            if m == 0.0 {
                zeros += 1;
            } else {
                lo = lo.min(m);
                hi = hi.max(m);
            }
        }
        Ok(match zeros {
            0 => RatioClass::Log2(floor_log2_ratio(hi, lo) as u32),
            z if z == vectors.len() => RatioClass::AllZero,
            _ => RatioClass::ZeroContaining,
        })
    });
    let classes: Vec<RatioClass> = classes.into_iter().collect::<Result<_, _>>()?;
    Ok(RatioHistogram::from_classes(classes))
}
