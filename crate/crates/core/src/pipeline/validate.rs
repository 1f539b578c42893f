use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::program::{AluProfile, Capability, Instr, StageProgram};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    /// A register array or table used outside the stage that declares it,
    /// declared in more than one stage, or not declared at all.
    RegisterCrossStage { array: String },
    /// A register array accessed more than once per packet.
    RegisterMultipleAccess { array: String },
    /// A field read before any instruction produces it, but produced later.
    BackwardDependency { field: String },
    UnsupportedCapability(Capability),
    UndeclaredField { field: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub stage: u32,
    pub stage_name: String,
    pub instruction: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} ({})", self.stage, self.stage_name)?;
        if let Some(i) = self.instruction {
            write!(f, " instruction {i}")?;
        }
        match &self.rule {
            Rule::RegisterCrossStage { array } => write!(f, ": RegisterCrossStage({array})"),
            Rule::RegisterMultipleAccess { array } => write!(f, ": RegisterMultipleAccess({array})"),
            Rule::BackwardDependency { field } => write!(f, ": BackwardDependency({field})"),
            Rule::UnsupportedCapability(cap) => write!(f, ": UnsupportedCapability({cap:?})"),
            Rule::UndeclaredField { field } => write!(f, ": UndeclaredField({field})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Warning {
    ResourcePressure { stage: u32, stage_name: String, instructions: usize, limit: usize },
    TablePressure { stage: u32, table: String, entries: usize, limit: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ResourcePressure { stage, stage_name, instructions, limit } => write!(
                f,
                "stage {stage} ({stage_name}): ResourcePressure: {instructions} instructions exceed {limit} slots"
            ),
            Warning::TablePressure { stage, table, entries, limit } => {
                write!(f, "stage {stage}: TablePressure: table {table} has {entries} entries, limit {limit}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Distinct capabilities the program needs but the profile lacks.
    pub fn missing_capabilities(&self) -> Vec<Capability> {
        let mut caps: Vec<_> = self
            .violations
            .iter()
            .filter_map(|v| match v.rule {
                Rule::UnsupportedCapability(c) => Some(c),
                _ => None,
            })
            .collect();
        caps.sort();
        caps.dedup();
        caps
    }
}

/// Checks a program against a profile's capabilities and the stage-locality
/// and forward-dataflow rules.
pub fn validate(program: &StageProgram, profile: &AluProfile) -> Validation {
    let mut out = Validation::default();
    let declared: HashSet<&str> = program.fields.iter().map(|f| f.name.as_str()).collect();
    let inputs: HashSet<&str> = program.fields.iter().filter(|f| f.input).map(|f| f.name.as_str()).collect();

    let violation = |stage: usize, instruction: Option<usize>, rule: Rule| Violation {
        stage: program.stages[stage].id,
        stage_name: program.stages[stage].name.clone(),
        instruction,
        rule,
    };

    let mut array_home: HashMap<&str, usize> = HashMap::new();
    for (si, stage) in program.stages.iter().enumerate() {
        for reg in &stage.registers {
            if array_home.insert(&reg.name, si).is_some() {
                out.violations.push(violation(si, None, Rule::RegisterCrossStage { array: reg.name.clone() }));
            }
        }
    }

    // (stage, instruction) of each field's first write
    let mut first_write: HashMap<&str, (usize, usize)> = HashMap::new();
    for (si, stage) in program.stages.iter().enumerate() {
        for (ii, instr) in stage.instructions.iter().enumerate() {
            let mut written: Vec<&str> = instr.writes().into_iter().map(String::as_str).collect();
            if let Instr::Lookup { table, .. } = instr {
                if let Some(t) = stage.tables.iter().find(|t| &t.name == table) {
                    written.extend(t.action_fields().map(String::as_str));
                }
            }
            for f in written {
                first_write.entry(f).or_insert((si, ii));
            }
        }
    }

    let mut accessed: HashSet<&str> = HashSet::new();
    for (si, stage) in program.stages.iter().enumerate() {
        for (ii, instr) in stage.instructions.iter().enumerate() {
            for cap in instr.capabilities() {
                if !profile.supports(cap) {
                    out.violations.push(violation(si, Some(ii), Rule::UnsupportedCapability(cap)));
                }
            }

            if let Some(array) = instr.register_array() {
                if array_home.get(array) != Some(&si) {
                    out.violations.push(violation(si, Some(ii), Rule::RegisterCrossStage { array: array.to_string() }));
                }
                if !accessed.insert(array) {
                    out.violations
                        .push(violation(si, Some(ii), Rule::RegisterMultipleAccess { array: array.to_string() }));
                }
            }
            if let Instr::Lookup { table, .. } = instr {
                if !stage.tables.iter().any(|t| &t.name == table) {
                    out.violations.push(violation(si, Some(ii), Rule::RegisterCrossStage { array: table.clone() }));
                }
            }

            let mut names: Vec<&String> = instr.reads();
            names.extend(instr.writes());
            for name in names {
                if !declared.contains(name.as_str()) {
                    out.violations.push(violation(si, Some(ii), Rule::UndeclaredField { field: name.clone() }));
                }
            }
            for name in instr.reads() {
                if inputs.contains(name.as_str()) {
                    continue;
                }
                if let Some(&pos) = first_write.get(name.as_str()) {
                    if pos > (si, ii) {
                        out.violations
                            .push(violation(si, Some(ii), Rule::BackwardDependency { field: name.clone() }));
                    }
                }
            }
        }

        for table in &stage.tables {
            for name in table.action_fields() {
                if !declared.contains(name.as_str()) {
                    out.violations.push(violation(si, None, Rule::UndeclaredField { field: name.clone() }));
                }
            }
            if table.entries.len() > profile.table_entries {
                out.warnings.push(Warning::TablePressure {
                    stage: stage.id,
                    table: table.name.clone(),
                    entries: table.entries.len(),
                    limit: profile.table_entries,
                });
            }
        }
        if stage.instructions.len() > profile.instruction_slots {
            out.warnings.push(Warning::ResourcePressure {
                stage: stage.id,
                stage_name: stage.name.clone(),
                instructions: stage.instructions.len(),
                limit: profile.instruction_slots,
            });
        }
    }
    out
}
