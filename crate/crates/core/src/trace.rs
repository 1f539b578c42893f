//! Stage-by-stage trace of adding two values through a built-in program.

use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::arith::{add, readout, to_fpisa, ArithError, FpisaConfig, FpisaValue};
use crate::formats::{decode, EncodeSignal, FpClass, FpFormat};
use crate::lpm::shared_table;
use crate::pipeline::builtin::FpisaPipeline;
use crate::pipeline::{AluProfile, PipelineError};
use crate::AddEvent;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Metadata fields shown for each stage, in stage order.
const STAGE_FIELDS: [&[&str]; 9] = [
    &["in_sign", "in_exp", "in_frac"],
    &["in_mant"],
    &["old_exp", "new_exp", "d", "overwrite"],
    &["in_aligned"],
    &["old_mant", "acc", "overflow"],
    &["neg", "mag"],
    &["lz", "s", "q", "carry"],
    &["out_exp"],
    &["out_word"],
];

#[derive(Debug, Clone, Serialize)]
pub struct StageSnapshot {
    pub stage: u32,
    pub name: String,
    pub fields: Vec<(String, i64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PacketTrace {
    pub word: u32,
    pub value: f64,
    pub sign: char,
    pub biased_exponent: u32,
    pub significand: String,
    pub stages: Vec<StageSnapshot>,
    pub state_before: FpisaValue,
    pub state_after: FpisaValue,
    pub aligned: i64,
    /// LPM entry the readout hit, in CIDR form for 32-bit registers.
    pub lpm_hit: Option<String>,
    pub shift: i64,
    pub event: String,
    pub discarded: Option<f64>,
    pub readout: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct AddTrace {
    pub format: String,
    pub variant: String,
    pub register_width: u32,
    pub guard_bits: u32,
    pub profile: String,
    pub packets: Vec<PacketTrace>,
    pub events: Vec<String>,
    pub result: u32,
    pub result_value: f64,
    pub signal: Option<String>,
}

/// `|v|` in binary with the point after bit `point`, e.g. `10.0b`.
pub fn binary_point(v: i64, point: u32) -> String {
    let mag = v.unsigned_abs();
    let int = mag >> point;
    let frac = mag & ((1u64 << point) - 1);
    let mut s = String::new();
    if v < 0 {
        s.push('-');
    }
    write!(s, "{int:b}.").unwrap();
    if frac == 0 {
        s.push('0');
    } else {
        let digits = format!("{frac:0width$b}", width = point as usize);
        s.push_str(digits.trim_end_matches('0'));
    }
    s.push('b');
    s
}

fn scaled(v: i64, exponent: u32, cfg: &FpisaConfig) -> String {
    let e = exponent as i64 - cfg.format.bias() as i64;
    format!("{} x 2^{e}", binary_point(v, cfg.canonical_leading_bit()))
}

fn value_text(fmt: FpFormat, bits: u32) -> String {
    let v = fmt.to_f64(bits);
    if v.fract() == 0.0 && v.is_finite() && v.abs() < 1e16 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// Adds `a` then `b` into an empty slot of the built-in program for `cfg`,
/// recording every stage of both packets.
pub fn trace_add(a: u32, b: u32, cfg: &FpisaConfig, profile: AluProfile) -> Result<AddTrace, TraceError> {
    let profile_name = format!("{:?}", profile.name).to_lowercase();
    let mut pipe = FpisaPipeline::new(*cfg, 1, profile)?;
    let mut state = FpisaValue::ZERO;
    let mut packets = Vec::new();
    let mut events = Vec::new();
    let table = shared_table(cfg.register_width);

    for word in [a, b] {
        let incoming = to_fpisa(word, cfg)?;
        let expected = add(state, incoming, cfg);
        let mut p = pipe.packet(crate::pipeline::builtin::OP_ADD, 0, word);
        let mut stages = Vec::new();
        let program = pipe.machine().program().source().clone();
        pipe.machine_mut().execute_traced(&mut p, |si, pkt, _| {
            let fields = STAGE_FIELDS[si]
                .iter()
                .filter_map(|f| pkt.get(f).ok().map(|v| (f.to_string(), v)))
                .collect();
            stages.push(StageSnapshot { stage: program.stages[si].id, name: program.stages[si].name.clone(), fields });
        })?;
        let observed = FpisaPipeline::decode_add(&p)?;
        debug_assert_eq!(observed.after, expected.state);

        let d = decode(word, cfg.format);
        let mag = observed.after.mantissa.unsigned_abs();
        let lpm_hit = table.lookup(mag).map(|e| match table.cidr(e) {
            Some(c) => c.to_string(),
            None => format!("{:#x}/{}", e.prefix, e.prefix_len),
        });
        let shift = p.get("s")?;
        let (event, discarded) = match expected.event {
            AddEvent::Overwrite { discarded } => ("OVERWRITE".to_string(), Some(discarded.to_f64(cfg))),
            AddEvent::RoundingLoss { bits_lost } => (format!("ROUNDING_LOSS({bits_lost} bits)"), None),
            AddEvent::HeadroomOverflow => ("HEADROOM_OVERFLOW".to_string(), None),
            AddEvent::None => (String::new(), None),
        };
        if !event.is_empty() {
            events.push(event.clone());
        }
        packets.push(PacketTrace {
            word,
            value: cfg.format.to_f64(word),
            sign: if d.sign.is_negative() { '-' } else { '+' },
            biased_exponent: d.biased_exponent,
            significand: match d.class {
                FpClass::Normal => binary_point(d.significand as i64, cfg.format.mantissa_bits()),
                _ => binary_point(0, cfg.format.mantissa_bits()),
            },
            stages,
            state_before: observed.before,
            state_after: observed.after,
            aligned: p.get("in_aligned")?,
            lpm_hit,
            shift,
            event,
            discarded,
            readout: observed.result,
        });
        state = expected.state;
    }

    let r = readout(&state, cfg, cfg.default_rounding())?;
    let last = packets.last().map(|p| p.readout).unwrap_or(r.bits);
    debug_assert_eq!(last, r.bits);
    Ok(AddTrace {
        format: cfg.format.to_string(),
        variant: cfg.variant.to_string(),
        register_width: cfg.register_width,
        guard_bits: cfg.guard_bits,
        profile: profile_name,
        packets,
        events,
        result: r.bits,
        result_value: cfg.format.to_f64(r.bits),
        signal: r.signal.map(|s| match s {
            EncodeSignal::ExponentOverflow => "EXPONENT_OVERFLOW".to_string(),
            EncodeSignal::ExponentUnderflow => "EXPONENT_UNDERFLOW".to_string(),
        }),
    })
}

impl AddTrace {
    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, cfg: &FpisaConfig) -> fmt::Result {
        let hex = |w: u32| format!("0x{w:0width$X}", width = (cfg.format.total_bits() / 4) as usize);
        writeln!(
            f,
            "format {}, variant {}, register {} bits, guard bits {}, profile {}",
            self.format, self.variant, self.register_width, self.guard_bits, self.profile
        )?;
        for (i, p) in self.packets.iter().enumerate() {
            writeln!(
                f,
                "packet {}: {} ({}) decoded ({}, {}, {})",
                i + 1,
                value_text(cfg.format, p.word),
                hex(p.word),
                p.sign,
                p.biased_exponent,
                p.significand
            )?;
            for s in &p.stages {
                write!(f, "  MAU{} {}:", s.stage, s.name)?;
                for (name, v) in &s.fields {
                    write!(f, " {name}={v}")?;
                }
                writeln!(f)?;
            }
            writeln!(
                f,
                "  exponent register {} -> {}",
                p.state_before.exponent, p.state_after.exponent
            )?;
            writeln!(f, "  aligned addend {}", scaled(p.aligned, p.state_after.exponent, cfg))?;
            writeln!(
                f,
                "  mantissa register {} -> {} ({})",
                p.state_before.mantissa,
                p.state_after.mantissa,
                scaled(p.state_after.mantissa, p.state_after.exponent, cfg)
            )?;
            let dir = match p.shift {
                s if s > 0 => format!("shift-right-{s}"),
                s if s < 0 => format!("shift-left-{}", -s),
                _ => "no shift".to_string(),
            };
            match &p.lpm_hit {
                Some(hit) => writeln!(f, "  LPM hit {hit}: {dir}")?,
                None => writeln!(f, "  LPM miss (zero): {dir}")?,
            }
            if !p.event.is_empty() {
                match p.discarded {
                    Some(v) => writeln!(f, "  event {} (discarded {v})", p.event)?,
                    None => writeln!(f, "  event {}", p.event)?,
                }
            }
            writeln!(f, "  readout {} ({})", value_text(cfg.format, p.readout), hex(p.readout))?;
        }
        if self.events.is_empty() {
            writeln!(f, "events: []")?;
        } else {
            writeln!(f, "events: [{}]", self.events.join(", "))?;
        }
        if let Some(s) = &self.signal {
            writeln!(f, "signal: {s}")?;
        }
        write!(f, "result = {} ({})", value_text(cfg.format, self.result), hex(self.result))
    }

    /// Renders the trace for a human reader.
    pub fn render(&self, cfg: &FpisaConfig) -> String {
        struct Show<'a>(&'a AddTrace, &'a FpisaConfig);
        impl fmt::Display for Show<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt_with(f, self.1)
            }
        }
        Show(self, cfg).to_string()
    }
}
