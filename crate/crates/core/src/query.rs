//! Query offload over floating-point columns: Top-N and group-by-extreme
//! pruning, and group-by sum.
//!
//! Comparisons use [`monotone_key`] with -0 folded onto +0, so integer
//! order on keys is exactly real order on finite values. A pruning switch
//! forwards a row only when it strictly improves on what it has cached; on
//! ties the earlier row wins.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::arith::{add_exact, readout, to_fpisa, AddEvent, FpisaConfig, FpisaValue, Variant};
use crate::exec::Exec;
use crate::formats::{decode, monotone_key, FpFormat};
use crate::pipeline::{builtin_program, validate, AluProfile, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Row {
    pub key: u64,
    pub value: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Largest,
    Smallest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Extreme {
    Max,
    Min,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "largest" | "max" | "desc" => Ok(Direction::Largest),
            "smallest" | "min" | "asc" => Ok(Direction::Smallest),
            _ => Err(format!("unknown direction {s:?} (expected largest or smallest)")),
        }
    }
}

impl FromStr for Extreme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Extreme::Max),
            "min" => Ok(Extreme::Min),
            _ => Err(format!("unknown extreme {s:?} (expected max or min)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("row {row} holds a non-finite value")]
    NonFinite { row: usize },
    #[error("top-n needs n >= 1")]
    ZeroN,
    #[error("group-by sum needs the exact variant")]
    NeedsExact,
    #[error("the exact program does not validate on the extended profile")]
    ProgramInvalid,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneReport<T> {
    pub rows_in: usize,
    pub rows_forwarded: usize,
    pub rows_dropped: usize,
    pub result: T,
}

impl<T> PruneReport<T> {
    pub fn drop_fraction(&self) -> f64 {
        if self.rows_in == 0 {
            0.0
        } else {
            self.rows_dropped as f64 / self.rows_in as f64
        }
    }
}

/// Order key of a finite word: integer order equals real order.
pub fn order_key(bits: u32, fmt: FpFormat) -> u32 {
    let bits = if bits & fmt.word_mask() & !fmt.sign_mask() == 0 { 0 } else { bits };
    monotone_key(bits, fmt).expect("finite value")
}

fn check_finite(rows: &[Row], fmt: FpFormat) -> Result<(), QueryError> {
    match rows.iter().position(|r| !decode(r.value, fmt).is_finite()) {
        Some(row) => Err(QueryError::NonFinite { row }),
        None => Ok(()),
    }
}

fn directed(key: u32, largest: bool) -> u32 {
    if largest {
        key
    } else {
        !key
    }
}

/// Exact Top-N: stable, so ties keep the earlier row.
pub fn topn_oracle(rows: &[Row], n: usize, direction: Direction, fmt: FpFormat) -> Vec<Row> {
    let largest = direction == Direction::Largest;
    let mut sorted: Vec<&Row> = rows.iter().collect();
    sorted.sort_by_key(|r| Reverse(directed(order_key(r.value, fmt), largest)));
    sorted.into_iter().take(n).copied().collect()
}

/// Switch keeps the `n` best keys seen; a row is forwarded iff fewer than
/// `n` are cached or it strictly beats the worst cached key. The master
/// computes the final Top-N over forwarded rows.
pub fn topn(rows: &[Row], n: usize, direction: Direction, fmt: FpFormat) -> Result<PruneReport<Vec<Row>>, QueryError> {
    if n == 0 {
        return Err(QueryError::ZeroN);
    }
    check_finite(rows, fmt)?;
    let largest = direction == Direction::Largest;
    let mut cache: BinaryHeap<Reverse<u32>> = BinaryHeap::with_capacity(n + 1);
    let mut forwarded = Vec::new();
    for r in rows {
        let k = directed(order_key(r.value, fmt), largest);
        if cache.len() < n {
            cache.push(Reverse(k));
        } else if cache.peek().is_some_and(|Reverse(worst)| k > *worst) {
            cache.pop();
            cache.push(Reverse(k));
        } else {
            continue;
        }
        forwarded.push(*r);
    }
    Ok(PruneReport {
        rows_in: rows.len(),
        rows_forwarded: forwarded.len(),
        rows_dropped: rows.len() - forwarded.len(),
        result: topn_oracle(&forwarded, n, direction, fmt),
    })
}

/// Exact per-group extreme, earliest row on ties.
pub fn groupby_extreme_oracle(rows: &[Row], which: Extreme, fmt: FpFormat) -> BTreeMap<u64, u32> {
    let largest = which == Extreme::Max;
    let mut best: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    for r in rows {
        let k = directed(order_key(r.value, fmt), largest);
        best.entry(r.key)
            .and_modify(|(bk, bv)| {
                if k > *bk {
                    (*bk, *bv) = (k, r.value);
                }
            })
            .or_insert((k, r.value));
    }
    best.into_iter().map(|(g, (_, v))| (g, v)).collect()
}

/// Per-group register holding the running extreme's key; rows that do not
/// strictly improve it are dropped.
pub fn groupby_having_extreme(
    rows: &[Row],
    which: Extreme,
    fmt: FpFormat,
) -> Result<PruneReport<BTreeMap<u64, u32>>, QueryError> {
    check_finite(rows, fmt)?;
    let largest = which == Extreme::Max;
    let mut register: HashMap<u64, u32> = HashMap::new();
    let mut forwarded = Vec::new();
    for r in rows {
        let k = directed(order_key(r.value, fmt), largest);
        let improves = register.get(&r.key).is_none_or(|&cur| k > cur);
        if improves {
            register.insert(r.key, k);
            forwarded.push(*r);
        }
    }
    Ok(PruneReport {
        rows_in: rows.len(),
        rows_forwarded: forwarded.len(),
        rows_dropped: rows.len() - forwarded.len(),
        result: groupby_extreme_oracle(&forwarded, which, fmt),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GroupResult {
    Sum { value: u32 },
    /// Accumulation stopped at `row` (index into the input stream).
    HeadroomOverflow { row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowEvent {
    pub row: usize,
    pub key: u64,
    pub event: AddEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSum {
    pub groups: BTreeMap<u64, GroupResult>,
    /// Rounding losses, by row.
    pub events: Vec<RowEvent>,
}

impl GroupSum {
    pub fn overflowed(&self) -> impl Iterator<Item = (u64, usize)> + '_ {
        self.groups.iter().filter_map(|(&k, r)| match r {
            GroupResult::HeadroomOverflow { row } => Some((k, *row)),
            _ => None,
        })
    }
}

/// Per-group accumulator fed in stream order with the exact variant. A
/// group whose mantissa register would overflow stops and reports an error.
pub fn groupby_sum(rows: &[Row], cfg: &FpisaConfig, exec: Exec) -> Result<GroupSum, QueryError> {
    if cfg.variant != Variant::Exact {
        return Err(QueryError::NeedsExact);
    }
    let program = builtin_program(cfg, 1, &AluProfile::extended())?;
    if !validate(&program, &AluProfile::extended()).is_ok() {
        return Err(QueryError::ProgramInvalid);
    }
    check_finite(rows, cfg.format)?;

    let mut by_group: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        by_group.entry(r.key).or_default().push(i);
    }
    let groups: Vec<(u64, Vec<usize>)> = by_group.into_iter().collect();
    let rounding = cfg.default_rounding();
    let per_group = exec.map_range(groups.len(), |gi| {
        let (key, idx) = &groups[gi];
        let mut state = FpisaValue::ZERO;
        let mut events = Vec::new();
        for &i in idx {
            let o = add_exact(state, to_fpisa(rows[i].value, cfg).expect("finite"), cfg);
            match o.event {
                AddEvent::HeadroomOverflow => return (GroupResult::HeadroomOverflow { row: i }, events),
                AddEvent::None => {}
                event => events.push(RowEvent { row: i, key: *key, event }),
            }
            state = o.state;
        }
        (GroupResult::Sum { value: readout(&state, cfg, rounding).expect("valid config").bits }, events)
    });
    let mut out = GroupSum { groups: BTreeMap::new(), events: Vec::new() };
    for ((key, _), (result, events)) in groups.iter().zip(per_group) {
        out.groups.insert(*key, result);
        out.events.extend(events);
    }
    out.events.sort_by_key(|e| e.row);
    Ok(out)
}

/// Rows read from `key,value` CSV. Keys are labels, numbered in order of
/// first appearance.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RowTable {
    pub rows: Vec<Row>,
    pub labels: Vec<String>,
    pub malformed: usize,
    pub non_finite: usize,
    /// 1-based line numbers of skipped records.
    pub skipped_lines: Vec<u64>,
}

impl RowTable {
    pub fn label(&self, key: u64) -> &str {
        &self.labels[key as usize]
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("expected header `key,value`, found `{0}`")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Reads `key,value` rows. Values round to nearest-even in `fmt`; malformed
/// and non-finite rows are skipped and counted.
pub fn read_rows<R: std::io::Read>(input: R, fmt: FpFormat) -> Result<RowTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    if header != ["key", "value"] {
        return Err(IngestError::Header(header.join(",")));
    }
    let mut table = RowTable::default();
    let mut ids: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let line = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line());
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                table.malformed += 1;
                table.skipped_lines.push(e.position().map_or(0, |p| p.line()));
                continue;
            }
        };
        let (Some(label), Some(value), 2) = (record.get(0), record.get(1), record.len()) else {
            table.malformed += 1;
            table.skipped_lines.push(line(&record));
            continue;
        };
        let Ok(bits) = fmt.parse_literal(value) else {
            table.malformed += 1;
            table.skipped_lines.push(line(&record));
            continue;
        };
        if label.is_empty() {
            table.malformed += 1;
            table.skipped_lines.push(line(&record));
            continue;
        }
        if !decode(bits, fmt).is_finite() {
            table.non_finite += 1;
            table.skipped_lines.push(line(&record));
            continue;
        }
        let next = ids.len() as u64;
        let key = *ids.entry(label.to_string()).or_insert_with(|| {
            table.labels.push(label.to_string());
            next
        });
        table.rows.push(Row { key, value: bits });
    }
    Ok(table)
}
