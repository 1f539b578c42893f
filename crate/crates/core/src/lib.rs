//! A software model of floating-point addition and comparison running on a
//! PISA-style match-action switch pipeline.
//!
//! - [`formats`]: IEEE-754-style formats, decode/encode, order-preserving keys.
//! - [`arith`]: the split exponent/mantissa register representation with
//!   exact and approximate addition and delayed renormalization.
//! - [`lpm`]: count-leading-zeros through a longest-prefix-match table.
//! - [`pipeline`]: a match-action machine, its validator and the built-in
//!   addition programs.
//! - [`aggregation`]: in-network gradient aggregation over a framed protocol.
//! - [`query`]: Top-N and group-by pruning, group-by sum.
//! - [`analysis`]: exact oracles, error classification and ratio statistics.

pub mod aggregation;
pub mod analysis;
pub mod arith;
pub mod exec;
pub mod formats;
pub mod lpm;
pub mod pipeline;
pub mod query;
pub mod trace;

pub use arith::{AddEvent, AddOutcome, FpisaConfig, FpisaValue, Variant};
pub use exec::Exec;
pub use formats::{FpFormat, RoundingMode};
