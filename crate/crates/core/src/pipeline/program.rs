use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// ALU features an instruction may need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Capability {
    FixedShift,
    VariableShift,
    StatefulReadAddWrite,
    StatefulReadShiftAddWrite,
    CompareSelect,
    TableLookup,
    BitwiseOps,
    AddSub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileName {
    Baseline,
    Extended,
}

impl FromStr for ProfileName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(ProfileName::Baseline),
            "extended" => Ok(ProfileName::Extended),
            _ => Err(format!("unknown profile {s:?} (expected baseline or extended)")),
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Baseline => "baseline",
            ProfileName::Extended => "extended",
        })
    }
}

/// The capability set programs compile under, plus soft per-stage limits
/// that the validator reports as resource pressure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AluProfile {
    pub name: ProfileName,
    pub capabilities: BTreeSet<Capability>,
    pub instruction_slots: usize,
    pub table_entries: usize,
}

impl AluProfile {
    /// Fixed-distance shifts only, and no stateful unit that both shifts and adds.
    pub fn baseline() -> Self {
        use Capability::*;
        AluProfile {
            name: ProfileName::Baseline,
            capabilities: [FixedShift, StatefulReadAddWrite, CompareSelect, TableLookup, BitwiseOps, AddSub]
                .into_iter()
                .collect(),
            instruction_slots: 32,
            table_entries: 4096,
        }
    }

    /// Baseline plus two-operand shifts and the read-shift-add-write unit.
    pub fn extended() -> Self {
        let mut p = Self::baseline();
        p.name = ProfileName::Extended;
        p.capabilities.insert(Capability::VariableShift);
        p.capabilities.insert(Capability::StatefulReadShiftAddWrite);
        p
    }

    pub fn named(name: ProfileName) -> Self {
        match name {
            ProfileName::Baseline => Self::baseline(),
            ProfileName::Extended => Self::extended(),
        }
    }

    pub fn supports(&self, cap: Capability) -> bool {
        self.capabilities.contains(&cap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand<F = String> {
    Field(F),
    Const(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cond<F = String> {
    pub lhs: Operand<F>,
    pub op: CmpOp,
    pub rhs: Operand<F>,
}

/// Stateless ALU operations on metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AluOp<F = String> {
    Move(Operand<F>),
    Add(Operand<F>, Operand<F>),
    Sub(Operand<F>, Operand<F>),
    And(Operand<F>, Operand<F>),
    Or(Operand<F>, Operand<F>),
    Xor(Operand<F>, Operand<F>),
    Shl { src: Operand<F>, amount: u32 },
    Shr { src: Operand<F>, amount: u32, arithmetic: bool },
    ShlVar { src: Operand<F>, amount: Operand<F> },
    ShrVar { src: Operand<F>, amount: Operand<F>, arithmetic: bool },
}

/// Inputs a stateful ALU condition can compare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatefulExpr<F = String> {
    Old,
    Meta(Operand<F>),
    MetaMinusOld(Operand<F>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatefulCmp<F = String> {
    pub lhs: StatefulExpr<F>,
    pub op: CmpOp,
    pub rhs: StatefulExpr<F>,
}

/// Read-modify-write micro-programs of the stateful ALU. Additions are
/// overflow-checked against the register width: on overflow the cell is
/// left unchanged and the flag output is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterAction<F = String> {
    Read,
    /// Writes `value` if any comparison holds; flag = written.
    WriteIf { any_of: Vec<StatefulCmp<F>>, value: Operand<F> },
    Add { addend: Operand<F> },
    /// `cell = (cell >> shift_right) + addend` in one access.
    ShiftAdd { shift_right: Operand<F>, addend: Operand<F> },
    /// `cell = value` when `set_when` is nonzero, else `cell += value`.
    AddOrSet { set_when: Operand<F>, value: Operand<F> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instr<F = String> {
    Alu {
        dst: F,
        op: AluOp<F>,
    },
    /// `dst = op` when the condition holds, otherwise `dst` is unchanged.
    Select {
        when: Cond<F>,
        dst: F,
        op: AluOp<F>,
    },
    /// Applies a table of this stage; the hit entry's action data is written
    /// to metadata.
    Lookup {
        table: String,
        key: Operand<F>,
    },
    Register {
        array: String,
        index: Operand<F>,
        action: RegisterAction<F>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        enable: Option<Operand<F>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        old_into: Option<F>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_into: Option<F>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        flag_into: Option<F>,
    },
    DropIf {
        when: Cond<F>,
    },
    /// Ends processing with a result carrying the field, big-endian.
    Emit {
        src: F,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    /// Set by the parser from the packet rather than computed by a stage.
    #[serde(default)]
    pub input: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterDecl {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Lpm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry<F = String> {
    pub value: u64,
    /// Ignored for exact-match tables.
    #[serde(default)]
    pub prefix_len: u32,
    pub action: Vec<(F, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDecl<F = String> {
    pub name: String,
    pub kind: MatchKind,
    pub key_width: u32,
    pub entries: Vec<TableEntry<F>>,
    #[serde(default)]
    pub default_action: Vec<(F, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage<F = String> {
    pub id: u32,
    pub name: String,
    /// Placement only; semantics are the same on either side.
    #[serde(default)]
    pub egress: bool,
    #[serde(default)]
    pub registers: Vec<RegisterDecl>,
    #[serde(default)]
    pub tables: Vec<TableDecl<F>>,
    pub instructions: Vec<Instr<F>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageProgram {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub stages: Vec<Stage>,
}

impl StageProgram {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("programs always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }
}

impl<F> AluOp<F> {
    pub fn capabilities(&self) -> Vec<Capability> {
        match self {
            AluOp::Move(_) => vec![],
            AluOp::Add(..) | AluOp::Sub(..) => vec![Capability::AddSub],
            AluOp::And(..) | AluOp::Or(..) | AluOp::Xor(..) => vec![Capability::BitwiseOps],
            AluOp::Shl { .. } | AluOp::Shr { .. } => vec![Capability::FixedShift],
            AluOp::ShlVar { .. } | AluOp::ShrVar { .. } => vec![Capability::VariableShift],
        }
    }

    pub fn operands(&self) -> Vec<&Operand<F>> {
        match self {
            AluOp::Move(a) => vec![a],
            AluOp::Add(a, b) | AluOp::Sub(a, b) | AluOp::And(a, b) | AluOp::Or(a, b) | AluOp::Xor(a, b) => {
                vec![a, b]
            }
            AluOp::Shl { src, .. } | AluOp::Shr { src, .. } => vec![src],
            AluOp::ShlVar { src, amount } | AluOp::ShrVar { src, amount, .. } => vec![src, amount],
        }
    }
}

impl<F> Instr<F> {
    pub fn capabilities(&self) -> Vec<Capability> {
        use Capability::*;
        match self {
            Instr::Alu { op, .. } => op.capabilities(),
            Instr::Select { op, .. } => {
                let mut caps = vec![CompareSelect];
                caps.extend(op.capabilities());
                caps
            }
            Instr::Lookup { .. } => vec![TableLookup],
            Instr::Register { action, .. } => match action {
                RegisterAction::Read | RegisterAction::Add { .. } => vec![StatefulReadAddWrite],
                RegisterAction::WriteIf { .. } | RegisterAction::AddOrSet { .. } => {
                    vec![StatefulReadAddWrite, CompareSelect]
                }
                RegisterAction::ShiftAdd { .. } => vec![StatefulReadShiftAddWrite],
            },
            Instr::DropIf { .. } => vec![CompareSelect],
            Instr::Emit { .. } => vec![],
        }
    }

    /// Metadata fields this instruction reads.
    pub fn reads(&self) -> Vec<&F> {
        fn push<'a, F>(out: &mut Vec<&'a F>, o: &'a Operand<F>) {
            if let Operand::Field(f) = o {
                out.push(f);
            }
        }
        let mut out = Vec::new();
        match self {
            Instr::Alu { op, .. } => op.operands().into_iter().for_each(|o| push(&mut out, o)),
            Instr::Select { when, op, .. } => {
                push(&mut out, &when.lhs);
                push(&mut out, &when.rhs);
                op.operands().into_iter().for_each(|o| push(&mut out, o));
            }
            Instr::Lookup { key, .. } => push(&mut out, key),
            Instr::Register { index, action, enable, .. } => {
                push(&mut out, index);
                if let Some(e) = enable {
                    push(&mut out, e);
                }
                match action {
                    RegisterAction::Read => {}
                    RegisterAction::WriteIf { any_of, value } => {
                        for c in any_of {
                            for e in [&c.lhs, &c.rhs] {
                                if let StatefulExpr::Meta(o) | StatefulExpr::MetaMinusOld(o) = e {
                                    push(&mut out, o);
                                }
                            }
                        }
                        push(&mut out, value);
                    }
                    RegisterAction::Add { addend } => push(&mut out, addend),
                    RegisterAction::ShiftAdd { shift_right, addend } => {
                        push(&mut out, shift_right);
                        push(&mut out, addend);
                    }
                    RegisterAction::AddOrSet { set_when, value } => {
                        push(&mut out, set_when);
                        push(&mut out, value);
                    }
                }
            }
            Instr::DropIf { when } => {
                push(&mut out, &when.lhs);
                push(&mut out, &when.rhs);
            }
            Instr::Emit { src } => out.push(src),
        }
        out
    }

    /// Metadata fields this instruction writes. Lookups write the fields
    /// named by their table's action data, which the caller resolves.
    pub fn writes(&self) -> Vec<&F> {
        match self {
            Instr::Alu { dst, .. } | Instr::Select { dst, .. } => vec![dst],
            Instr::Register { old_into, new_into, flag_into, .. } => {
                [old_into, new_into, flag_into].into_iter().flatten().collect()
            }
            Instr::Lookup { .. } | Instr::DropIf { .. } | Instr::Emit { .. } => vec![],
        }
    }

    pub fn register_array(&self) -> Option<&str> {
        match self {
            Instr::Register { array, .. } => Some(array),
            _ => None,
        }
    }
}

impl<F> TableDecl<F> {
    pub fn action_fields(&self) -> impl Iterator<Item = &F> {
        self.entries
            .iter()
            .flat_map(|e| e.action.iter().map(|(f, _)| f))
            .chain(self.default_action.iter().map(|(f, _)| f))
    }
}

/// Shorthand constructors used by the built-in programs and tests.
pub mod build {
    use super::*;

    pub fn fld(name: &str) -> Operand {
        Operand::Field(name.to_string())
    }

    pub fn k(value: i64) -> Operand {
        Operand::Const(value)
    }

    pub fn cond(lhs: Operand, op: CmpOp, rhs: Operand) -> Cond {
        Cond { lhs, op, rhs }
    }

    pub fn alu(dst: &str, op: AluOp) -> Instr {
        Instr::Alu { dst: dst.to_string(), op }
    }

    pub fn select(when: Cond, dst: &str, op: AluOp) -> Instr {
        Instr::Select { when, dst: dst.to_string(), op }
    }

    pub fn mov(dst: &str, src: Operand) -> Instr {
        alu(dst, AluOp::Move(src))
    }

    pub fn field(name: &str, width: u32, signed: bool) -> FieldDecl {
        FieldDecl { name: name.to_string(), width, signed, input: false }
    }

    pub fn input(name: &str, width: u32) -> FieldDecl {
        FieldDecl { name: name.to_string(), width, signed: false, input: true }
    }
}
