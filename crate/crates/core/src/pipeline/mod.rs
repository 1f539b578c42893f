//! A small match-action pipeline model: a stage program IR, a validator for
//! the target's per-stage constraints, and an interpreter.

pub mod builtin;
pub mod machine;
pub mod program;
pub mod validate;

use thiserror::Error;

use crate::arith::{ArithError, Variant};

pub use builtin::{builtin_program, FpisaPipeline, PipelineAdd};
pub use machine::{CompiledProgram, Machine, PacketContext, RegisterStore, Verdict};
pub use program::{AluProfile, Capability, ProfileName, StageProgram};
pub use validate::{validate, Rule, Validation, Violation, Warning};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("undeclared field {0}")]
    UndeclaredField(String),
    #[error("undeclared table {0}")]
    UndeclaredTable(String),
    #[error("undeclared register array {0}")]
    UndeclaredRegister(String),
    #[error("index {index} out of bounds for register array {array} of length {length}")]
    RegisterIndexOutOfBounds { array: String, index: i64, length: usize },
    #[error("program violates {} constraint(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("the {variant} variant cannot run on the {profile:?} profile")]
    ProfileMismatch { variant: Variant, profile: ProfileName },
    #[error(transparent)]
    Config(#[from] ArithError),
    #[error("packet dropped")]
    Dropped,
    #[error("packet finished without a result")]
    NoResult,
}
