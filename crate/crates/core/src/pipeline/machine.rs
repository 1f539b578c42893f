use std::collections::HashMap;
use std::sync::Arc;

use super::program::{
    AluOp, AluProfile, Cond, FieldDecl, Instr, MatchKind, Operand, RegisterAction, RegisterDecl, StageProgram,
    StatefulCmp, StatefulExpr,
};
use super::validate::validate;
use super::PipelineError;
use crate::lpm::prefix_mask;

type Ix = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Forward,
    Drop,
    Result(Vec<u8>),
}

#[derive(Debug)]
pub struct FieldLayout {
    decls: Vec<FieldDecl>,
    index: HashMap<String, Ix>,
}

impl FieldLayout {
    fn new(decls: Vec<FieldDecl>) -> Self {
        let index = decls.iter().enumerate().map(|(i, d)| (d.name.clone(), i)).collect();
        FieldLayout { decls, index }
    }

    pub fn lookup(&self, name: &str) -> Result<Ix, PipelineError> {
        self.index.get(name).copied().ok_or_else(|| PipelineError::UndeclaredField(name.to_string()))
    }

    pub fn decls(&self) -> &[FieldDecl] {
        &self.decls
    }
}

/// Truncates to `width` bits, sign-extending when `signed`.
fn fit(value: i64, width: u32, signed: bool) -> i64 {
    if width >= 64 {
        return value;
    }
    if signed {
        let shift = 64 - width;
        (value << shift) >> shift
    } else {
        value & ((1i64 << width) - 1)
    }
}

fn fits_register(value: i128, decl: &RegisterDecl) -> bool {
    if decl.signed {
        let limit = 1i128 << (decl.width - 1);
        -limit < value && value < limit
    } else {
        0 <= value && value < 1i128 << decl.width
    }
}

/// Per-packet metadata, payload and verdict.
#[derive(Debug, Clone)]
pub struct PacketContext {
    layout: Arc<FieldLayout>,
    values: Vec<i64>,
    pub payload: Vec<u8>,
    pub verdict: Verdict,
}

impl PacketContext {
    pub fn get(&self, name: &str) -> Result<i64, PipelineError> {
        Ok(self.values[self.layout.lookup(name)?])
    }

    /// Sets a field, truncated to its declared width.
    pub fn set(&mut self, name: &str, value: i64) -> Result<(), PipelineError> {
        let ix = self.layout.lookup(name)?;
        self.write(ix, value);
        Ok(())
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, i64)> {
        self.layout.decls.iter().map(|d| d.name.as_str()).zip(self.values.iter().copied())
    }

    fn write(&mut self, ix: Ix, value: i64) {
        let d = &self.layout.decls[ix];
        self.values[ix] = fit(value, d.width, d.signed);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterArray {
    pub decl: RegisterDecl,
    pub cells: Vec<i64>,
}

/// Switch register memory, one array per declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterStore {
    arrays: Vec<RegisterArray>,
}

impl RegisterStore {
    pub fn for_program(program: &StageProgram) -> Self {
        let arrays = program
            .stages
            .iter()
            .flat_map(|s| s.registers.iter())
            .map(|d| RegisterArray { decl: d.clone(), cells: vec![0; d.length] })
            .collect();
        RegisterStore { arrays }
    }

    fn position(&self, name: &str) -> Result<usize, PipelineError> {
        self.arrays
            .iter()
            .position(|a| a.decl.name == name)
            .ok_or_else(|| PipelineError::UndeclaredRegister(name.to_string()))
    }

    pub fn array(&self, name: &str) -> Result<&RegisterArray, PipelineError> {
        Ok(&self.arrays[self.position(name)?])
    }

    pub fn get(&self, name: &str, index: usize) -> Result<i64, PipelineError> {
        let a = self.array(name)?;
        a.cells.get(index).copied().ok_or(PipelineError::RegisterIndexOutOfBounds {
            array: name.to_string(),
            index: index as i64,
            length: a.cells.len(),
        })
    }

    /// Control-plane write, truncated to the register width.
    pub fn set(&mut self, name: &str, index: usize, value: i64) -> Result<(), PipelineError> {
        let p = self.position(name)?;
        let a = &mut self.arrays[p];
        let length = a.cells.len();
        let cell = a.cells.get_mut(index).ok_or(PipelineError::RegisterIndexOutOfBounds {
            array: name.to_string(),
            index: index as i64,
            length,
        })?;
        *cell = fit(value, a.decl.width, a.decl.signed);
        Ok(())
    }

    pub fn arrays(&self) -> &[RegisterArray] {
        &self.arrays
    }
}

type Action = Vec<(Ix, i64)>;

#[derive(Debug)]
struct CTable {
    kind: MatchKind,
    key_width: u32,
    // LPM entries sorted longest prefix first
    entries: Vec<(u64, u32, Action)>,
    default_action: Action,
}

#[derive(Debug)]
enum CInstr {
    Plain(Instr<Ix>),
    Lookup { table: usize, key: Operand<Ix> },
    Register { array: usize, instr: Instr<Ix> },
}

#[derive(Debug)]
struct CStage {
    tables: Vec<CTable>,
    instructions: Vec<CInstr>,
}

/// A program with names resolved to indices, ready to execute.
#[derive(Debug)]
pub struct CompiledProgram {
    source: StageProgram,
    layout: Arc<FieldLayout>,
    stages: Vec<CStage>,
}

fn resolve_operand(o: &Operand, layout: &FieldLayout) -> Result<Operand<Ix>, PipelineError> {
    Ok(match o {
        Operand::Field(f) => Operand::Field(layout.lookup(f)?),
        Operand::Const(c) => Operand::Const(*c),
    })
}

fn resolve_cond(c: &Cond, layout: &FieldLayout) -> Result<Cond<Ix>, PipelineError> {
    Ok(Cond { lhs: resolve_operand(&c.lhs, layout)?, op: c.op, rhs: resolve_operand(&c.rhs, layout)? })
}

fn resolve_alu(op: &AluOp, l: &FieldLayout) -> Result<AluOp<Ix>, PipelineError> {
    let r = |o: &Operand| resolve_operand(o, l);
    Ok(match op {
        AluOp::Move(a) => AluOp::Move(r(a)?),
        AluOp::Add(a, b) => AluOp::Add(r(a)?, r(b)?),
        AluOp::Sub(a, b) => AluOp::Sub(r(a)?, r(b)?),
        AluOp::And(a, b) => AluOp::And(r(a)?, r(b)?),
        AluOp::Or(a, b) => AluOp::Or(r(a)?, r(b)?),
        AluOp::Xor(a, b) => AluOp::Xor(r(a)?, r(b)?),
        AluOp::Shl { src, amount } => AluOp::Shl { src: r(src)?, amount: *amount },
        AluOp::Shr { src, amount, arithmetic } => AluOp::Shr { src: r(src)?, amount: *amount, arithmetic: *arithmetic },
        AluOp::ShlVar { src, amount } => AluOp::ShlVar { src: r(src)?, amount: r(amount)? },
        AluOp::ShrVar { src, amount, arithmetic } => {
            AluOp::ShrVar { src: r(src)?, amount: r(amount)?, arithmetic: *arithmetic }
        }
    })
}

fn resolve_sexpr(e: &StatefulExpr, l: &FieldLayout) -> Result<StatefulExpr<Ix>, PipelineError> {
    Ok(match e {
        StatefulExpr::Old => StatefulExpr::Old,
        StatefulExpr::Meta(o) => StatefulExpr::Meta(resolve_operand(o, l)?),
        StatefulExpr::MetaMinusOld(o) => StatefulExpr::MetaMinusOld(resolve_operand(o, l)?),
    })
}

fn resolve_action(a: &RegisterAction, l: &FieldLayout) -> Result<RegisterAction<Ix>, PipelineError> {
    let r = |o: &Operand| resolve_operand(o, l);
    Ok(match a {
        RegisterAction::Read => RegisterAction::Read,
        RegisterAction::WriteIf { any_of, value } => RegisterAction::WriteIf {
            any_of: any_of
                .iter()
                .map(|c| {
                    Ok(StatefulCmp { lhs: resolve_sexpr(&c.lhs, l)?, op: c.op, rhs: resolve_sexpr(&c.rhs, l)? })
                })
                .collect::<Result<_, PipelineError>>()?,
            value: r(value)?,
        },
        RegisterAction::Add { addend } => RegisterAction::Add { addend: r(addend)? },
        RegisterAction::ShiftAdd { shift_right, addend } => {
            RegisterAction::ShiftAdd { shift_right: r(shift_right)?, addend: r(addend)? }
        }
        RegisterAction::AddOrSet { set_when, value } => {
            RegisterAction::AddOrSet { set_when: r(set_when)?, value: r(value)? }
        }
    })
}

fn resolve_instr(instr: &Instr, l: &FieldLayout) -> Result<Instr<Ix>, PipelineError> {
    let opt = |f: &Option<String>| f.as_deref().map(|n| l.lookup(n)).transpose();
    Ok(match instr {
        Instr::Alu { dst, op } => Instr::Alu { dst: l.lookup(dst)?, op: resolve_alu(op, l)? },
        Instr::Select { when, dst, op } => {
            Instr::Select { when: resolve_cond(when, l)?, dst: l.lookup(dst)?, op: resolve_alu(op, l)? }
        }
        Instr::Lookup { table, key } => Instr::Lookup { table: table.clone(), key: resolve_operand(key, l)? },
        Instr::Register { array, index, action, enable, old_into, new_into, flag_into } => Instr::Register {
            array: array.clone(),
            index: resolve_operand(index, l)?,
            action: resolve_action(action, l)?,
            enable: enable.as_ref().map(|e| resolve_operand(e, l)).transpose()?,
            old_into: opt(old_into)?,
            new_into: opt(new_into)?,
            flag_into: opt(flag_into)?,
        },
        Instr::DropIf { when } => Instr::DropIf { when: resolve_cond(when, l)? },
        Instr::Emit { src } => Instr::Emit { src: l.lookup(src)? },
    })
}

impl CompiledProgram {
    pub fn compile(program: &StageProgram) -> Result<Self, PipelineError> {
        let layout = Arc::new(FieldLayout::new(program.fields.clone()));
        let store = RegisterStore::for_program(program);
        let mut stages = Vec::with_capacity(program.stages.len());
        for stage in &program.stages {
            let mut tables = Vec::new();
            for t in &stage.tables {
                let action = |a: &[(String, i64)]| -> Result<Vec<(Ix, i64)>, PipelineError> {
                    a.iter().map(|(f, v)| Ok((layout.lookup(f)?, *v))).collect()
                };
                let mut entries = t
                    .entries
                    .iter()
                    .map(|e| Ok((e.value, e.prefix_len, action(&e.action)?)))
                    .collect::<Result<Vec<_>, PipelineError>>()?;
                entries.sort_by_key(|e| std::cmp::Reverse(e.1));
                tables.push(CTable {
                    kind: t.kind,
                    key_width: t.key_width,
                    entries,
                    default_action: action(&t.default_action)?,
                });
            }
            let mut instructions = Vec::with_capacity(stage.instructions.len());
            for instr in &stage.instructions {
                let c = match instr {
                    Instr::Lookup { table, key } => {
                        let table = stage
                            .tables
                            .iter()
                            .position(|t| &t.name == table)
                            .ok_or_else(|| PipelineError::UndeclaredTable(table.clone()))?;
                        CInstr::Lookup { table, key: resolve_operand(key, &layout)? }
                    }
                    Instr::Register { array, .. } => {
                        CInstr::Register { array: store.position(array)?, instr: resolve_instr(instr, &layout)? }
                    }
                    _ => CInstr::Plain(resolve_instr(instr, &layout)?),
                };
                instructions.push(c);
            }
            stages.push(CStage { tables, instructions });
        }
        Ok(CompiledProgram { source: program.clone(), layout, stages })
    }

    pub fn source(&self) -> &StageProgram {
        &self.source
    }

    pub fn new_packet(&self) -> PacketContext {
        PacketContext {
            layout: Arc::clone(&self.layout),
            values: vec![0; self.layout.decls.len()],
            payload: Vec::new(),
            verdict: Verdict::Forward,
        }
    }

    pub fn new_registers(&self) -> RegisterStore {
        RegisterStore::for_program(&self.source)
    }

    pub fn field_index(&self, name: &str) -> Result<usize, PipelineError> {
        self.layout.lookup(name)
    }

    /// Runs the packet through every stage in order.
    pub fn execute(&self, packet: &mut PacketContext, registers: &mut RegisterStore) -> Result<(), PipelineError> {
        self.execute_traced(packet, registers, |_, _, _| {})
    }

    /// Like [`execute`](Self::execute), calling `observe` after each stage
    /// with the stage index.
    pub fn execute_traced<F>(
        &self,
        packet: &mut PacketContext,
        registers: &mut RegisterStore,
        mut observe: F,
    ) -> Result<(), PipelineError>
    where
        F: FnMut(usize, &PacketContext, &RegisterStore),
    {
        for (si, stage) in self.stages.iter().enumerate() {
            for instr in &stage.instructions {
                match instr {
                    CInstr::Plain(i) => {
                        if !exec_plain(i, packet) {
                            observe(si, packet, registers);
                            return Ok(());
                        }
                    }
                    CInstr::Lookup { table, key } => {
                        let t = &stage.tables[*table];
                        let key = operand(key, packet) as u64;
                        let hit = t.entries.iter().find(|(value, len, _)| match t.kind {
                            MatchKind::Exact => *value == key,
                            MatchKind::Lpm => (key ^ value) & prefix_mask(*len, t.key_width) == 0,
                        });
                        let action = hit.map_or(&t.default_action, |(_, _, a)| a);
                        for &(f, v) in action {
                            packet.write(f, v);
                        }
                    }
                    CInstr::Register { array, instr } => exec_register(*array, instr, packet, registers)?,
                }
            }
            observe(si, packet, registers);
        }
        Ok(())
    }
}

fn operand(o: &Operand<Ix>, p: &PacketContext) -> i64 {
    match o {
        Operand::Field(i) => p.values[*i],
        Operand::Const(c) => *c,
    }
}

fn shift_amount(v: i64) -> u32 {
    v.clamp(0, 64) as u32
}

fn shl(v: i64, amount: u32) -> i64 {
    if amount >= 64 {
        0
    } else {
        v << amount
    }
}

fn shr(v: i64, amount: u32, arithmetic: bool) -> i64 {
    match (arithmetic, amount >= 64) {
        (true, _) => v >> amount.min(63),
        (false, true) => 0,
        (false, false) => ((v as u64) >> amount) as i64,
    }
}

fn eval_alu(op: &AluOp<Ix>, p: &PacketContext) -> i64 {
    let o = |x: &Operand<Ix>| operand(x, p);
    match op {
        AluOp::Move(a) => o(a),
        AluOp::Add(a, b) => o(a).wrapping_add(o(b)),
        AluOp::Sub(a, b) => o(a).wrapping_sub(o(b)),
        AluOp::And(a, b) => o(a) & o(b),
        AluOp::Or(a, b) => o(a) | o(b),
        AluOp::Xor(a, b) => o(a) ^ o(b),
        AluOp::Shl { src, amount } => shl(o(src), *amount),
        AluOp::Shr { src, amount, arithmetic } => shr(o(src), *amount, *arithmetic),
        AluOp::ShlVar { src, amount } => shl(o(src), shift_amount(o(amount))),
        AluOp::ShrVar { src, amount, arithmetic } => shr(o(src), shift_amount(o(amount)), *arithmetic),
    }
}

fn eval_cond(c: &Cond<Ix>, p: &PacketContext) -> bool {
    c.op.eval(operand(&c.lhs, p), operand(&c.rhs, p))
}

/// Returns false when the packet leaves the pipeline.
fn exec_plain(instr: &Instr<Ix>, p: &mut PacketContext) -> bool {
    match instr {
        Instr::Alu { dst, op } => {
            let v = eval_alu(op, p);
            p.write(*dst, v);
        }
        Instr::Select { when, dst, op } => {
            if eval_cond(when, p) {
                let v = eval_alu(op, p);
                p.write(*dst, v);
            }
        }
        Instr::DropIf { when } => {
            if eval_cond(when, p) {
                p.verdict = Verdict::Drop;
                return false;
            }
        }
        Instr::Emit { src } => {
            let width = p.layout.decls[*src].width.div_ceil(8) as usize;
            let bytes = (p.values[*src] as u64).to_be_bytes();
            p.verdict = Verdict::Result(bytes[8 - width..].to_vec());
            return false;
        }
        Instr::Lookup { .. } | Instr::Register { .. } => unreachable!("compiled separately"),
    }
    true
}

fn exec_register(
    array: usize,
    instr: &Instr<Ix>,
    p: &mut PacketContext,
    registers: &mut RegisterStore,
) -> Result<(), PipelineError> {
    let Instr::Register { index, action, enable, old_into, new_into, flag_into, .. } = instr else {
        unreachable!("register instruction")
    };
    let reg = &mut registers.arrays[array];
    let idx = operand(index, p);
    let length = reg.cells.len();
    if idx < 0 || idx as usize >= length {
        return Err(PipelineError::RegisterIndexOutOfBounds { array: reg.decl.name.clone(), index: idx, length });
    }
    let old = reg.cells[idx as usize];
    let enabled = enable.as_ref().is_none_or(|e| operand(e, p) != 0);
    let o = |x: &Operand<Ix>| operand(x, p);
    let checked_add = |base: i64, addend: i64| {
        let sum = base as i128 + addend as i128;
        if fits_register(sum, &reg.decl) {
            (sum as i64, 0)
        } else {
            (old, 1)
        }
    };
    let (new, flag) = if !enabled {
        (old, 0)
    } else {
        match action {
            RegisterAction::Read => (old, 0),
            RegisterAction::WriteIf { any_of, value } => {
                let sexpr = |e: &StatefulExpr<Ix>| match e {
                    StatefulExpr::Old => old,
                    StatefulExpr::Meta(x) => o(x),
                    StatefulExpr::MetaMinusOld(x) => o(x).wrapping_sub(old),
                };
                if any_of.iter().any(|c| c.op.eval(sexpr(&c.lhs), sexpr(&c.rhs))) {
                    (fit(o(value), reg.decl.width, reg.decl.signed), 1)
                } else {
                    (old, 0)
                }
            }
            RegisterAction::Add { addend } => checked_add(old, o(addend)),
            RegisterAction::ShiftAdd { shift_right, addend } => {
                checked_add(shr(old, shift_amount(o(shift_right)), true), o(addend))
            }
            RegisterAction::AddOrSet { set_when, value } => {
                if o(set_when) != 0 {
                    (fit(o(value), reg.decl.width, reg.decl.signed), 0)
                } else {
                    checked_add(old, o(value))
                }
            }
        }
    };
    reg.cells[idx as usize] = new;
    for (target, v) in [(old_into, old), (new_into, new), (flag_into, flag)] {
        if let Some(f) = target {
            p.write(*f, v);
        }
    }
    Ok(())
}

/// A compiled program bound to its register memory.
#[derive(Debug)]
pub struct Machine {
    program: CompiledProgram,
    registers: RegisterStore,
    profile: AluProfile,
}

impl Machine {
    /// Validates against `profile` and compiles.
    pub fn new(program: &StageProgram, profile: AluProfile) -> Result<Self, PipelineError> {
        let report = validate(program, &profile);
        if !report.is_ok() {
            return Err(PipelineError::Invalid(report.violations));
        }
        let program = CompiledProgram::compile(program)?;
        let registers = program.new_registers();
        Ok(Machine { program, registers, profile })
    }

    pub fn program(&self) -> &CompiledProgram {
        &self.program
    }

    pub fn profile(&self) -> &AluProfile {
        &self.profile
    }

    pub fn registers(&self) -> &RegisterStore {
        &self.registers
    }

    pub fn registers_mut(&mut self) -> &mut RegisterStore {
        &mut self.registers
    }

    pub fn new_packet(&self) -> PacketContext {
        self.program.new_packet()
    }

    pub fn execute(&mut self, packet: &mut PacketContext) -> Result<(), PipelineError> {
        self.program.execute(packet, &mut self.registers)
    }

    pub fn execute_traced<F>(&mut self, packet: &mut PacketContext, observe: F) -> Result<(), PipelineError>
    where
        F: FnMut(usize, &PacketContext, &RegisterStore),
    {
        self.program.execute_traced(packet, &mut self.registers, observe)
    }
}
