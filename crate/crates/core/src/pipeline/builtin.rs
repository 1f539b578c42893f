//! Built-in programs implementing FP addition across nine stages:
//!
//! | stage | work |
//! |-------|------|
//! | 0 | extract sign/exponent/fraction |
//! | 1 | restore the implied one, apply sign |
//! | 2 | exponent register: compare and update |
//! | 3 | align the incoming mantissa |
//! | 4 | mantissa register: (shift and) add |
//! | 5 | two's complement to sign/magnitude (egress) |
//! | 6 | CLZ via LPM table, normalizing shift and rounding |
//! | 7 | exponent adjust, range clamp |
//! | 8 | assemble the output word |
//!
//! Without variable shifts every shift distance becomes its own
//! compare-and-shift instruction.

use super::machine::{Machine, PacketContext, Verdict};
use super::program::build::{alu, cond, field, fld, input, k, mov, select};
use super::program::{
    AluOp, AluProfile, Capability, CmpOp, FieldDecl, Instr, MatchKind, Operand, RegisterAction, RegisterDecl, Stage,
    StageProgram, StatefulCmp, StatefulExpr, TableDecl, TableEntry,
};
use super::PipelineError;
use crate::arith::{FpisaConfig, FpisaValue, Variant};
use crate::formats::RoundingMode;

pub const EXP_REG: &str = "exp_reg";
pub const MANT_REG: &str = "mant_reg";

/// Value of the `op` input field.
pub const OP_ADD: i64 = 0;
pub const OP_READ: i64 = 1;

struct Dims {
    n: u32,
    m: u32,
    g: u32,
    r: u32,
    total: u32,
    headroom: u32,
}

fn fields(d: &Dims) -> Vec<FieldDecl> {
    let Dims { n, m, g, r, total, .. } = *d;
    vec![
        input("op", 8),
        input("slot", 32),
        input("in_word", total),
        field("in_sign", 1, false),
        field("in_exp_raw", total, false),
        field("in_exp", n, false),
        field("in_frac", m, false),
        field("add_en", 1, false),
        field("sig", m + 1 + g, false),
        field("in_mant", r, true),
        field("old_exp", n, false),
        field("new_exp", n, false),
        field("overwrite", 1, false),
        field("d", 16, true),
        field("rsh_in", 16, false),
        field("rsh_st", 16, false),
        field("lsh", 16, false),
        field("in_aligned", r, true),
        field("old_mant", r, true),
        field("acc", r, true),
        field("overflow", 1, false),
        field("neg", 1, false),
        field("mag", r, false),
        field("lz", 8, false),
        field("s", 16, true),
        field("rs", 16, false),
        field("ls", 16, false),
        field("q", 64, true),
        field("odd", 64, true),
        field("half", 64, true),
        field("radd", 64, true),
        field("t", 64, true),
        field("carry", 1, false),
        field("out_exp", 16, true),
        field("frac", m, false),
        field("w_sign", total, false),
        field("w_exp", total, false),
        field("out_word", total, false),
    ]
}

fn stage(id: u32, name: &str, egress: bool, instructions: Vec<Instr>) -> Stage {
    Stage { id, name: name.to_string(), egress, registers: vec![], tables: vec![], instructions }
}

fn extract(d: &Dims) -> Stage {
    let exp_all_ones = (1i64 << d.n) - 1;
    stage(
        0,
        "extract",
        false,
        vec![
            alu("in_sign", AluOp::Shr { src: fld("in_word"), amount: d.total - 1, arithmetic: false }),
            alu("in_exp_raw", AluOp::Shr { src: fld("in_word"), amount: d.m, arithmetic: false }),
            alu("in_exp", AluOp::And(fld("in_exp_raw"), k(exp_all_ones))),
            alu("in_frac", AluOp::And(fld("in_word"), k((1i64 << d.m) - 1))),
            Instr::DropIf { when: cond(fld("in_exp"), CmpOp::Eq, k(exp_all_ones)) },
            select(cond(fld("op"), CmpOp::Eq, k(OP_ADD)), "add_en", AluOp::Move(k(1))),
        ],
    )
}

fn implied_one(d: &Dims) -> Stage {
    let mut instrs = vec![
        alu("sig", AluOp::Or(fld("in_frac"), k(1i64 << d.m))),
        // subnormals flush to zero
        select(cond(fld("in_exp"), CmpOp::Eq, k(0)), "sig", AluOp::Move(k(0))),
    ];
    if d.g > 0 {
        instrs.push(alu("sig", AluOp::Shl { src: fld("sig"), amount: d.g }));
    }
    instrs.push(mov("in_mant", fld("sig")));
    instrs.push(select(cond(fld("in_sign"), CmpOp::Ne, k(0)), "in_mant", AluOp::Sub(k(0), fld("sig"))));
    stage(1, "implied_one", false, instrs)
}

fn exponent(d: &Dims, variant: Variant, n_slots: usize) -> Stage {
    let any_of = match variant {
        Variant::Exact => vec![StatefulCmp { lhs: StatefulExpr::Meta(fld("in_exp")), op: CmpOp::Gt, rhs: StatefulExpr::Old }],
        Variant::Approx => vec![
            StatefulCmp { lhs: StatefulExpr::Old, op: CmpOp::Eq, rhs: StatefulExpr::Meta(k(0)) },
            StatefulCmp {
                lhs: StatefulExpr::MetaMinusOld(fld("in_exp")),
                op: CmpOp::Gt,
                rhs: StatefulExpr::Meta(k(d.headroom as i64)),
            },
        ],
    };
    let mut s = stage(
        2,
        "exponent",
        false,
        vec![
            Instr::Register {
                array: EXP_REG.to_string(),
                index: fld("slot"),
                action: RegisterAction::WriteIf { any_of, value: fld("in_exp") },
                enable: Some(fld("add_en")),
                old_into: Some("old_exp".into()),
                new_into: Some("new_exp".into()),
                flag_into: (variant == Variant::Approx).then(|| "overwrite".into()),
            },
            alu("d", AluOp::Sub(fld("in_exp"), fld("old_exp"))),
        ],
    );
    s.registers.push(RegisterDecl { name: EXP_REG.into(), width: d.n, signed: false, length: n_slots });
    s
}

fn align(d: &Dims, variant: Variant, variable_shift: bool) -> Stage {
    let mut instrs = vec![
        mov("rsh_in", k(0)),
        select(cond(fld("d"), CmpOp::Lt, k(0)), "rsh_in", AluOp::Sub(k(0), fld("d"))),
    ];
    match variant {
        Variant::Exact => {
            instrs.push(mov("rsh_st", k(0)));
            instrs.push(select(cond(fld("d"), CmpOp::Gt, k(0)), "rsh_st", AluOp::Move(fld("d"))));
        }
        Variant::Approx => {
            instrs.push(mov("lsh", k(0)));
            instrs.push(select(cond(fld("d"), CmpOp::Gt, k(0)), "lsh", AluOp::Move(fld("d"))));
            instrs.push(select(cond(fld("overwrite"), CmpOp::Ne, k(0)), "lsh", AluOp::Move(k(0))));
        }
    }
    if variable_shift {
        instrs.push(alu("in_aligned", AluOp::ShrVar { src: fld("in_mant"), amount: fld("rsh_in"), arithmetic: true }));
        if variant == Variant::Approx {
            instrs.push(alu("in_aligned", AluOp::ShlVar { src: fld("in_aligned"), amount: fld("lsh") }));
        }
    } else {
        instrs.push(mov("in_aligned", fld("in_mant")));
        for dist in 1..d.r - 1 {
            instrs.push(select(
                cond(fld("rsh_in"), CmpOp::Eq, k(dist as i64)),
                "in_aligned",
                AluOp::Shr { src: fld("in_mant"), amount: dist, arithmetic: true },
            ));
        }
        // anything from r-1 on leaves only sign bits
        instrs.push(select(
            cond(fld("rsh_in"), CmpOp::Ge, k(d.r as i64 - 1)),
            "in_aligned",
            AluOp::Shr { src: fld("in_mant"), amount: d.r - 1, arithmetic: true },
        ));
        if variant == Variant::Approx {
            for dist in 1..=d.headroom {
                instrs.push(select(
                    cond(fld("lsh"), CmpOp::Eq, k(dist as i64)),
                    "in_aligned",
                    AluOp::Shl { src: fld("in_mant"), amount: dist },
                ));
            }
        }
    }
    stage(3, "align", false, instrs)
}

fn mantissa(d: &Dims, variant: Variant, n_slots: usize) -> Stage {
    let action = match variant {
        Variant::Exact => RegisterAction::ShiftAdd { shift_right: fld("rsh_st"), addend: fld("in_aligned") },
        Variant::Approx => RegisterAction::AddOrSet { set_when: fld("overwrite"), value: fld("in_aligned") },
    };
    let mut s = stage(
        4,
        "mantissa",
        false,
        vec![Instr::Register {
            array: MANT_REG.to_string(),
            index: fld("slot"),
            action,
            enable: Some(fld("add_en")),
            old_into: Some("old_mant".into()),
            new_into: Some("acc".into()),
            flag_into: Some("overflow".into()),
        }],
    );
    s.registers.push(RegisterDecl { name: MANT_REG.into(), width: d.r, signed: true, length: n_slots });
    s
}

fn sign_magnitude() -> Stage {
    let negative = || cond(fld("acc"), CmpOp::Lt, k(0));
    stage(
        5,
        "sign_magnitude",
        true,
        vec![
            mov("neg", k(0)),
            select(negative(), "neg", AluOp::Move(k(1))),
            mov("mag", fld("acc")),
            select(negative(), "mag", AluOp::Sub(k(0), fld("acc"))),
        ],
    )
}

fn clz_table(width: u32) -> TableDecl {
    TableDecl {
        name: "clz".into(),
        kind: MatchKind::Lpm,
        key_width: width,
        entries: (1..=width)
            .map(|i| TableEntry { value: 1u64 << (width - i), prefix_len: i, action: vec![("lz".into(), i as i64 - 1)] })
            .collect(),
        default_action: vec![("lz".into(), width as i64)],
    }
}

fn normalize(d: &Dims, rounding: RoundingMode, variable_shift: bool) -> Stage {
    let s_eq = |v: i64| cond(fld("s"), CmpOp::Eq, k(v));
    let right_cases = 1..=(d.r - 1 - d.m);
    let left_cases = 1..=d.m;
    let mut instrs = vec![
        Instr::Lookup { table: "clz".into(), key: fld("mag") },
        // distance from the leading one down to bit m
        alu("s", AluOp::Sub(k((d.r - 1 - d.m) as i64), fld("lz"))),
    ];
    if variable_shift {
        instrs.extend([
            mov("rs", k(0)),
            select(cond(fld("s"), CmpOp::Gt, k(0)), "rs", AluOp::Move(fld("s"))),
            mov("ls", k(0)),
            select(cond(fld("s"), CmpOp::Lt, k(0)), "ls", AluOp::Sub(k(0), fld("s"))),
        ]);
        match rounding {
            RoundingMode::TowardNegInf => instrs.extend([
                // floor on the signed value, then the magnitude
                alu("q", AluOp::ShrVar { src: fld("acc"), amount: fld("rs"), arithmetic: true }),
                select(cond(fld("q"), CmpOp::Lt, k(0)), "q", AluOp::Sub(k(0), fld("q"))),
                alu("q", AluOp::ShlVar { src: fld("q"), amount: fld("ls") }),
            ]),
            RoundingMode::NearestEven => instrs.extend([
                alu("q", AluOp::ShrVar { src: fld("mag"), amount: fld("rs"), arithmetic: false }),
                alu("odd", AluOp::And(fld("q"), k(1))),
                alu("half", AluOp::ShlVar { src: k(1), amount: fld("rs") }),
                alu("half", AluOp::Shr { src: fld("half"), amount: 1, arithmetic: false }),
                mov("radd", k(0)),
                select(cond(fld("rs"), CmpOp::Gt, k(0)), "radd", AluOp::Sub(fld("half"), k(1))),
                select(cond(fld("rs"), CmpOp::Gt, k(0)), "radd", AluOp::Add(fld("radd"), fld("odd"))),
                alu("t", AluOp::Add(fld("mag"), fld("radd"))),
                alu("q", AluOp::ShrVar { src: fld("t"), amount: fld("rs"), arithmetic: false }),
                alu("q", AluOp::ShlVar { src: fld("q"), amount: fld("ls") }),
            ]),
        }
    } else {
        match rounding {
            RoundingMode::TowardNegInf => {
                instrs.push(mov("q", fld("acc")));
                for dist in right_cases {
                    instrs.push(select(
                        s_eq(dist as i64),
                        "q",
                        AluOp::Shr { src: fld("acc"), amount: dist, arithmetic: true },
                    ));
                }
                instrs.push(select(cond(fld("q"), CmpOp::Lt, k(0)), "q", AluOp::Sub(k(0), fld("q"))));
                for dist in left_cases {
                    instrs.push(select(s_eq(-(dist as i64)), "q", AluOp::Shl { src: fld("q"), amount: dist }));
                }
            }
            RoundingMode::NearestEven => {
                instrs.push(mov("q", fld("mag")));
                for dist in right_cases.clone() {
                    instrs.push(select(
                        s_eq(dist as i64),
                        "q",
                        AluOp::Shr { src: fld("mag"), amount: dist, arithmetic: false },
                    ));
                }
                instrs.push(alu("odd", AluOp::And(fld("q"), k(1))));
                instrs.push(mov("radd", k(0)));
                for dist in right_cases.clone() {
                    instrs.push(select(s_eq(dist as i64), "radd", AluOp::Move(k((1i64 << (dist - 1)) - 1))));
                }
                instrs.push(select(cond(fld("s"), CmpOp::Gt, k(0)), "radd", AluOp::Add(fld("radd"), fld("odd"))));
                instrs.push(alu("t", AluOp::Add(fld("mag"), fld("radd"))));
                for dist in right_cases {
                    instrs.push(select(
                        s_eq(dist as i64),
                        "q",
                        AluOp::Shr { src: fld("t"), amount: dist, arithmetic: false },
                    ));
                }
                for dist in left_cases {
                    instrs.push(select(s_eq(-(dist as i64)), "q", AluOp::Shl { src: fld("mag"), amount: dist }));
                }
            }
        }
    }
    // rounding carried into bit m+1
    instrs.extend([
        mov("carry", k(0)),
        select(cond(fld("q"), CmpOp::Eq, k(1i64 << (d.m + 1))), "carry", AluOp::Move(k(1))),
        select(cond(fld("carry"), CmpOp::Ne, k(0)), "q", AluOp::Move(k(1i64 << d.m))),
    ]);
    let mut s = stage(6, "normalize", true, instrs);
    s.tables.push(clz_table(d.r));
    s
}

fn exponent_adjust(d: &Dims) -> Stage {
    let exp_all_ones = (1i64 << d.n) - 1;
    let mut instrs = vec![alu("out_exp", AluOp::Add(fld("new_exp"), fld("s")))];
    if d.g > 0 {
        instrs.push(alu("out_exp", AluOp::Sub(fld("out_exp"), k(d.g as i64))));
    }
    let too_big = || cond(fld("out_exp"), CmpOp::Ge, k(exp_all_ones));
    let too_small = || cond(fld("out_exp"), CmpOp::Le, k(0));
    let zero = || cond(fld("mag"), CmpOp::Eq, k(0));
    instrs.extend([
        select(cond(fld("carry"), CmpOp::Ne, k(0)), "out_exp", AluOp::Add(fld("out_exp"), k(1))),
        // overflow to infinity
        select(too_big(), "q", AluOp::Move(k(1i64 << d.m))),
        select(too_big(), "out_exp", AluOp::Move(k(exp_all_ones))),
        // underflow flushes to a signed zero
        select(too_small(), "q", AluOp::Move(k(0))),
        select(too_small(), "out_exp", AluOp::Move(k(0))),
        select(zero(), "out_exp", AluOp::Move(k(0))),
        select(zero(), "neg", AluOp::Move(k(0))),
    ]);
    stage(7, "exponent_adjust", true, instrs)
}

fn assemble(d: &Dims) -> Stage {
    stage(
        8,
        "assemble",
        true,
        vec![
            alu("frac", AluOp::And(fld("q"), k((1i64 << d.m) - 1))),
            alu("w_sign", AluOp::Shl { src: fld("neg"), amount: d.total - 1 }),
            alu("w_exp", AluOp::Shl { src: fld("out_exp"), amount: d.m }),
            alu("out_word", AluOp::Or(fld("w_sign"), fld("w_exp"))),
            alu("out_word", AluOp::Or(fld("out_word"), fld("frac"))),
            Instr::Emit { src: "out_word".into() },
        ],
    )
}

/// Builds the addition program for `cfg.variant`.
///
/// The exact variant needs the extended profile. The approximate variant
/// uses variable shifts when the profile has them and fixed-shift case
/// expansion otherwise. Readout uses [`FpisaConfig::default_rounding`].
pub fn builtin_program(cfg: &FpisaConfig, n_slots: usize, profile: &AluProfile) -> Result<StageProgram, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let variable_shift = profile.supports(Capability::VariableShift);
    if cfg.variant == Variant::Exact
        && !(variable_shift && profile.supports(Capability::StatefulReadShiftAddWrite))
    {
        return Err(PipelineError::ProfileMismatch { variant: cfg.variant, profile: profile.name });
    }
    let d = Dims {
        n: cfg.format.exponent_bits(),
        m: cfg.format.mantissa_bits(),
        g: cfg.guard_bits,
        r: cfg.register_width,
        total: cfg.format.total_bits(),
        headroom: cfg.headroom(),
    };
    Ok(StageProgram {
        name: format!("fpisa_{}_{}", cfg.variant, cfg.format),
        fields: fields(&d),
        stages: vec![
            extract(&d),
            implied_one(&d),
            exponent(&d, cfg.variant, n_slots),
            align(&d, cfg.variant, variable_shift),
            mantissa(&d, cfg.variant, n_slots),
            sign_magnitude(),
            normalize(&d, cfg.default_rounding(), variable_shift),
            exponent_adjust(&d),
            assemble(&d),
        ],
    })
}

/// What one addition packet observed and produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineAdd {
    pub before: FpisaValue,
    pub after: FpisaValue,
    pub overflow: bool,
    pub overwrite: bool,
    /// Readout of `after`, as emitted by the assemble stage.
    pub result: u32,
}

/// A machine running a built-in program, addressed by slot and word.
#[derive(Debug)]
pub struct FpisaPipeline {
    cfg: FpisaConfig,
    machine: Machine,
}

impl FpisaPipeline {
    pub fn new(cfg: FpisaConfig, n_slots: usize, profile: AluProfile) -> Result<Self, PipelineError> {
        let program = builtin_program(&cfg, n_slots, &profile)?;
        Ok(FpisaPipeline { cfg, machine: Machine::new(&program, profile)? })
    }

    pub fn config(&self) -> &FpisaConfig {
        &self.cfg
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn machine_mut(&mut self) -> &mut Machine {
        &mut self.machine
    }

    pub fn packet(&self, op: i64, slot: usize, word: u32) -> PacketContext {
        let mut p = self.machine.new_packet();
        p.set("op", op).expect("builtin field");
        p.set("slot", slot as i64).expect("builtin field");
        p.set("in_word", word as i64).expect("builtin field");
        p
    }

    fn result_word(packet: &PacketContext) -> Result<u32, PipelineError> {
        match &packet.verdict {
            Verdict::Result(bytes) => Ok(bytes.iter().fold(0u32, |acc, b| (acc << 8) | *b as u32)),
            Verdict::Drop => Err(PipelineError::Dropped),
            Verdict::Forward => Err(PipelineError::NoResult),
        }
    }

    /// Adds `word` into `slot` and returns the observed state change.
    pub fn add(&mut self, slot: usize, word: u32) -> Result<PipelineAdd, PipelineError> {
        let mut p = self.packet(OP_ADD, slot, word);
        self.machine.execute(&mut p)?;
        Self::decode_add(&p)
    }

    pub(crate) fn decode_add(p: &PacketContext) -> Result<PipelineAdd, PipelineError> {
        let state = |e: &str, m: &str| -> Result<FpisaValue, PipelineError> {
            Ok(FpisaValue { exponent: p.get(e)? as u32, mantissa: p.get(m)? })
        };
        Ok(PipelineAdd {
            before: state("old_exp", "old_mant")?,
            after: state("new_exp", "acc")?,
            overflow: p.get("overflow")? != 0,
            overwrite: p.get("overwrite")? != 0,
            result: Self::result_word(p)?,
        })
    }

    /// Reads the slot out without changing it.
    pub fn read(&mut self, slot: usize) -> Result<u32, PipelineError> {
        let mut p = self.packet(OP_READ, slot, 0);
        self.machine.execute(&mut p)?;
        Self::result_word(&p)
    }

    pub fn state(&self, slot: usize) -> Result<FpisaValue, PipelineError> {
        let regs = self.machine.registers();
        Ok(FpisaValue { exponent: regs.get(EXP_REG, slot)? as u32, mantissa: regs.get(MANT_REG, slot)? })
    }

    /// Control-plane write of a slot's registers.
    pub fn load(&mut self, slot: usize, value: FpisaValue) -> Result<(), PipelineError> {
        let regs = self.machine.registers_mut();
        regs.set(EXP_REG, slot, value.exponent as i64)?;
        regs.set(MANT_REG, slot, value.mantissa)
    }

    pub fn clear(&mut self, slot: usize) -> Result<(), PipelineError> {
        self.load(slot, FpisaValue::ZERO)
    }
}

/// Counts instructions in `stage` that are compare-and-fixed-shift cases.
pub fn fixed_shift_cases(stage: &Stage) -> (usize, usize) {
    let mut right = 0;
    let mut left = 0;
    for i in &stage.instructions {
        if let Instr::Select { op, when, .. } = i {
            if matches!(when.rhs, Operand::Const(_)) {
                match op {
                    AluOp::Shr { .. } => right += 1,
                    AluOp::Shl { .. } => left += 1,
                    _ => {}
                }
            }
        }
    }
    (right, left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{add, readout, to_fpisa};
    use crate::pipeline::validate::validate;
    use crate::FpFormat;

    fn cfg(variant: Variant) -> FpisaConfig {
        FpisaConfig::fp32(variant)
    }

    #[test]
    fn one_plus_three() {
        for (variant, profile) in [
            (Variant::Exact, AluProfile::extended()),
            (Variant::Approx, AluProfile::extended()),
            (Variant::Approx, AluProfile::baseline()),
        ] {
            let mut p = FpisaPipeline::new(cfg(variant), 4, profile).unwrap();
            p.add(2, 0x3F80_0000).unwrap();
            let r = p.add(2, 0x4040_0000).unwrap();
            assert_eq!(r.result, 0x4080_0000, "{variant}");
            assert_eq!(p.read(2).unwrap(), 0x4080_0000);
            assert_eq!(p.read(1).unwrap(), 0);
        }
    }

    #[test]
    fn exact_needs_extended() {
        let c = cfg(Variant::Exact);
        assert!(matches!(
            builtin_program(&c, 1, &AluProfile::baseline()),
            Err(PipelineError::ProfileMismatch { .. })
        ));
        // the same program checked against the smaller profile
        let program = builtin_program(&c, 1, &AluProfile::extended()).unwrap();
        let report = validate(&program, &AluProfile::baseline());
        assert_eq!(
            report.missing_capabilities(),
            vec![Capability::VariableShift, Capability::StatefulReadShiftAddWrite]
        );
        assert!(validate(&program, &AluProfile::extended()).is_ok());
    }

    #[test]
    fn approx_on_baseline_expands_shifts() {
        let program = builtin_program(&cfg(Variant::Approx), 1, &AluProfile::baseline()).unwrap();
        let report = validate(&program, &AluProfile::baseline());
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!(!report.warnings.is_empty());
        assert_eq!(fixed_shift_cases(program.stage("normalize").unwrap()), (8, 23));
        assert_eq!(fixed_shift_cases(program.stage("align").unwrap()), (31, 7));
    }

    #[test]
    fn nan_and_inf_are_dropped() {
        let mut p = FpisaPipeline::new(cfg(Variant::Exact), 1, AluProfile::extended()).unwrap();
        assert_eq!(p.add(0, 0x7FC0_0000), Err(PipelineError::Dropped));
        assert_eq!(p.add(0, 0xFF80_0000), Err(PipelineError::Dropped));
        assert_eq!(p.state(0).unwrap(), FpisaValue::ZERO);
    }

    #[test]
    fn matches_core_on_mixed_inputs() {
        let words = [
            0x3F80_0000u32, 0xC040_0000, 0x0000_0001, 0x7F7F_FFFF, 0x7F7F_FFFF, 0xFF7F_FFFF, 0x3380_0000,
            0x8000_0000, 0x4B80_0001, 0xCB80_0001, 0x0080_0000,
        ];
        for fmt_cfg in [
            cfg(Variant::Exact),
            cfg(Variant::Approx),
            cfg(Variant::Exact).with_guard_bits(2),
            FpisaConfig::new(FpFormat::FP16, Variant::Approx).with_register_width(16),
            FpisaConfig::new(FpFormat::BF16, Variant::Exact).with_register_width(16).with_guard_bits(1),
        ] {
            let mut p = FpisaPipeline::new(fmt_cfg, 1, AluProfile::extended()).unwrap();
            let mut state = FpisaValue::ZERO;
            for w in words {
                let w = w & fmt_cfg.format.word_mask();
                let Ok(inc) = to_fpisa(w, &fmt_cfg) else { continue };
                let expect = add(state, inc, &fmt_cfg);
                let got = p.add(0, w).unwrap();
                assert_eq!(got.before, state);
                assert_eq!(got.after, expect.state, "{fmt_cfg:?} {w:#x}");
                state = expect.state;
                let r = readout(&state, &fmt_cfg, fmt_cfg.default_rounding()).unwrap();
                assert_eq!(got.result, r.bits);
            }
        }
    }
}
