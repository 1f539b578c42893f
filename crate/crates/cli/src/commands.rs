use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use fpisa::aggregation::input::{read_worker_file, InputKind};
use fpisa::aggregation::{aggregate_vectors, run_protocol, AggregationError, CapacityWarning, ElementEvent, SessionConfig};
use fpisa::analysis::synthetic::{self, Distribution};
use fpisa::analysis::{error_distribution, ratio_distribution, AnalysisError};
use fpisa::formats::decode;
use fpisa::pipeline::{builtin_program, validate as validate_program, AluProfile, PipelineError, StageProgram};
use fpisa::query::{
    groupby_having_extreme, groupby_sum, read_rows, topn, Direction, Extreme, GroupResult, QueryError, RowTable,
};
use fpisa::trace::{trace_add, TraceError};
use fpisa::{AddEvent, Exec, Variant};
use serde::Serialize;

use crate::config::{CommonArgs, OutputFormat, RunConfig, VariantArg};
use crate::output::{emit, hex, json, value_text};
use crate::{EXIT_INVALID, EXIT_STRICT, EXIT_USAGE};

/// Exit code for an error: 2 for programs or configurations the pipeline
/// rejects, 1 otherwise.
pub fn exit_code_for(e: &anyhow::Error) -> u8 {
    let pipeline_rejects = |p: &PipelineError| matches!(p, PipelineError::ProfileMismatch { .. } | PipelineError::Invalid(_));
    for cause in e.chain() {
        let invalid = cause.downcast_ref::<PipelineError>().is_some_and(pipeline_rejects)
            || cause.downcast_ref::<TraceError>().is_some_and(|t| matches!(t, TraceError::Pipeline(p) if pipeline_rejects(p)))
            || cause
                .downcast_ref::<AggregationError>()
                .is_some_and(|a| matches!(a, AggregationError::Pipeline(p) if pipeline_rejects(p)))
            || cause.downcast_ref::<QueryError>().is_some_and(|q| {
                matches!(q, QueryError::NeedsExact | QueryError::ProgramInvalid)
                    || matches!(q, QueryError::Pipeline(p) if pipeline_rejects(p))
            });
        if invalid {
            return EXIT_INVALID;
        }
    }
    EXIT_USAGE
}

fn event_kind(e: &AddEvent) -> &'static str {
    match e {
        AddEvent::None => "None",
        AddEvent::RoundingLoss { .. } => "RoundingLoss",
        AddEvent::Overwrite { .. } => "Overwrite",
        AddEvent::HeadroomOverflow => "HeadroomOverflow",
    }
}

fn is_severe(e: &AddEvent) -> bool {
    matches!(e, AddEvent::Overwrite { .. } | AddEvent::HeadroomOverflow)
}

fn exec_for(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

pub fn add(common: &CommonArgs, a: &str, b: &str) -> Result<u8> {
    let rc = RunConfig::resolve(common, OutputFormat::Csv)?;
    let fmt = rc.fpisa.format;
    let parse = |s: &str| -> Result<u32> {
        let bits = fmt.parse_literal(s).map_err(|e| anyhow!("{s:?}: {e}"))?;
        if !decode(bits, fmt).is_finite() {
            bail!("{s:?} is not finite in {fmt}");
        }
        Ok(bits)
    };
    let (wa, wb) = (parse(a)?, parse(b)?);
    let trace = trace_add(wa, wb, &rc.fpisa, rc.profile.clone())?;
    let text = match rc.output_format {
        OutputFormat::Json => json(&trace),
        OutputFormat::Csv => trace.render(&rc.fpisa) + "\n",
    };
    emit(rc.output.as_deref(), &text)?;
    let severe = trace.events.iter().any(|e| e == "OVERWRITE" || e == "HEADROOM_OVERFLOW");
    Ok(if rc.strict && severe { EXIT_STRICT } else { 0 })
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Validate a built-in addition program
    #[arg(long, value_enum)]
    builtin: Option<VariantArg>,
    /// Validate a program from a JSON file
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    program: Option<PathBuf>,
    /// Print the program JSON instead of the report
    #[arg(long)]
    emit_program: bool,
    /// Register slots in built-in programs
    #[arg(long, default_value_t = 16)]
    slots: usize,
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    program: &'a str,
    profile: String,
    instruction_slots: usize,
    ok: bool,
    violations: Vec<String>,
    warnings: Vec<String>,
    missing_capabilities: Vec<String>,
}

pub fn validate(common: &CommonArgs, args: &ValidateArgs) -> Result<u8> {
    let rc = RunConfig::resolve(common, OutputFormat::Csv)?;
    let program = match (&args.program, args.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            StageProgram::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(v)) => {
            let cfg = rc.fpisa.with_variant(v.into());
            // the exact program only exists in its extended form
            match builtin_program(&cfg, args.slots, &rc.profile) {
                Err(PipelineError::ProfileMismatch { .. }) => builtin_program(&cfg, args.slots, &AluProfile::extended())?,
                other => other?,
            }
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let report = validate_program(&program, &rc.profile);
    let code = if report.is_ok() { 0 } else { EXIT_INVALID };
    if args.emit_program {
        emit(rc.output.as_deref(), &(program.to_json() + "\n"))?;
        return Ok(code);
    }
    let out = ValidateReport {
        program: &program.name,
        profile: format!("{:?}", rc.profile.name).to_lowercase(),
        instruction_slots: rc.profile.instruction_slots,
        ok: report.is_ok(),
        violations: report.violations.iter().map(|v| v.to_string()).collect(),
        warnings: report.warnings.iter().map(|w| w.to_string()).collect(),
        missing_capabilities: report.missing_capabilities().iter().map(|c| format!("{c:?}")).collect(),
    };
    let text = match rc.output_format {
        OutputFormat::Json => json(&out),
        OutputFormat::Csv => {
            let mut s = format!(
                "program {} on profile {} ({} instruction slots)\n",
                out.program, out.profile, out.instruction_slots
            );
            for v in &out.violations {
                writeln!(s, "violation: {v}")?;
            }
            for w in &out.warnings {
                writeln!(s, "warning: {w}")?;
            }
            if !out.missing_capabilities.is_empty() {
                writeln!(s, "missing capabilities: {}", out.missing_capabilities.join(", "))?;
            }
            writeln!(
                s,
                "{}: {} violations, {} warnings",
                if out.ok { "ok" } else { "invalid" },
                out.violations.len(),
                out.warnings.len()
            )?;
            s
        }
    };
    emit(rc.output.as_deref(), &text)?;
    Ok(code)
}

#[derive(Debug, Args)]
pub struct VectorInput {
    /// One input file per worker
    #[arg(long, num_args = 1..)]
    workers: Vec<PathBuf>,
    /// Worker file encoding: csv (decimal literals) or binary (little-endian words)
    #[arg(long, default_value = "csv")]
    input_kind: String,
    /// Generate inputs: uniform(lo,hi) or lognormal(sigma[,mu])
    #[arg(long, conflicts_with = "workers")]
    synthetic: Option<String>,
    /// Number of synthetic workers
    #[arg(long)]
    n: Option<usize>,
    /// Elements per synthetic worker vector
    #[arg(long)]
    len: Option<usize>,
    /// Run element-parallel work on one thread
    #[arg(long)]
    sequential: bool,
}

impl VectorInput {
    fn load(&self, rc: &RunConfig) -> Result<Vec<Vec<u32>>> {
        let fmt = rc.fpisa.format;
        if let Some(spec) = &self.synthetic {
            let dist: Distribution = spec.parse().map_err(|e: String| anyhow!(e))?;
            let n = self.n.or(rc.file.workers).unwrap_or(8);
            let len = self.len.unwrap_or(1024);
            return Ok(synthetic::worker_vectors(dist, n, len, rc.seed, fmt, exec_for(self.sequential)));
        }
        if self.workers.is_empty() {
            bail!("give --workers FILE... or --synthetic SPEC");
        }
        let kind: InputKind = self.input_kind.parse().map_err(|e: String| anyhow!(e))?;
        self.workers.iter().map(|p| Ok(read_worker_file(p, kind, fmt)?)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    /// Frames through a switch session running the built-in program
    Protocol,
    /// Direct fold with the arithmetic functions
    Functional,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[command(flatten)]
    input: VectorInput,
    #[arg(long, value_enum, default_value = "protocol")]
    engine: Engine,
    /// Switch slots (protocol engine)
    #[arg(long)]
    slots: Option<usize>,
    /// Elements per packet (protocol engine)
    #[arg(long)]
    elements_per_packet: Option<usize>,
    /// Write the event report (JSON) here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct EventLine {
    element: usize,
    worker: usize,
    kind: &'static str,
}

#[derive(Serialize)]
struct AggregateReport {
    engine: &'static str,
    format: String,
    variant: String,
    workers: usize,
    elements: usize,
    slots: Option<usize>,
    elements_per_packet: Option<usize>,
    frames_sent: Option<usize>,
    capacity_warning: Option<CapacityWarning>,
    event_counts: BTreeMap<&'static str, usize>,
    /// Overwrite and headroom-overflow events; rounding losses are only counted.
    events: Vec<EventLine>,
}

#[derive(Serialize)]
struct ValueLine {
    element: usize,
    value: String,
    bits: String,
}

#[derive(Serialize)]
struct AggregateOutput<'a> {
    result: Vec<ValueLine>,
    report: &'a AggregateReport,
}

pub fn aggregate(common: &CommonArgs, args: &AggregateArgs) -> Result<u8> {
    let rc = RunConfig::resolve(common, OutputFormat::Csv)?;
    let vectors = args.input.load(&rc)?;
    let fmt = rc.fpisa.format;
    let len = vectors.first().map_or(0, Vec::len);
    let exec = exec_for(args.input.sequential);
    let (result, events, mut report) = match args.engine {
        Engine::Functional => {
            let agg = aggregate_vectors(&vectors, &rc.fpisa, exec)?;
            let report = base_report("functional", &rc, vectors.len(), len);
            (agg.result, agg.events, report)
        }
        Engine::Protocol => {
            let slots = args.slots.or(rc.file.slots).unwrap_or(128);
            let e = args.elements_per_packet.or(rc.file.elements_per_packet).unwrap_or(64).min(len.max(1));
            let config = SessionConfig {
                n_workers: vectors.len(),
                n_slots: slots,
                elements_per_packet: e,
                fpisa: rc.fpisa,
                profile: rc.profile.clone(),
            };
            let run = run_protocol(&vectors, config)?;
            let mut report = base_report("protocol", &rc, vectors.len(), len);
            report.slots = Some(slots);
            report.elements_per_packet = Some(e);
            report.frames_sent = Some(run.frames_sent);
            report.capacity_warning = run.capacity_warning;
            (run.result, run.events, report)
        }
    };
    if report.capacity_warning.is_none() {
        let capacity = fpisa::arith::overflow_capacity(&rc.fpisa);
        if vectors.len() as u64 > capacity {
            report.capacity_warning = Some(CapacityWarning { n_workers: vectors.len(), capacity });
        }
    }
    fill_events(&mut report, &events);

    let text = match rc.output_format {
        OutputFormat::Json => {
            let result = result
                .iter()
                .enumerate()
                .map(|(element, &w)| ValueLine { element, value: value_text(w, fmt), bits: hex(w, fmt) })
                .collect();
            json(&AggregateOutput { result, report: &report })
        }
        OutputFormat::Csv => {
            let mut s = String::from("element,value,bits\n");
            for (i, &w) in result.iter().enumerate() {
                writeln!(s, "{i},{},{}", value_text(w, fmt), hex(w, fmt))?;
            }
            s
        }
    };
    emit(rc.output.as_deref(), &text)?;
    if let Some(path) = &args.report {
        std::fs::write(path, json(&report)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(w) = report.capacity_warning {
        eprintln!("warning: OverflowCapacityWarning: {} workers exceed the overflow-free capacity of {}", w.n_workers, w.capacity);
    }
    for (kind, n) in &report.event_counts {
        eprintln!("{kind}: {n}");
    }
    let severe = events.iter().any(|e| is_severe(&e.event));
    Ok(if rc.strict && severe { EXIT_STRICT } else { 0 })
}

fn base_report(engine: &'static str, rc: &RunConfig, workers: usize, elements: usize) -> AggregateReport {
    AggregateReport {
        engine,
        format: rc.fpisa.format.to_string(),
        variant: rc.fpisa.variant.to_string(),
        workers,
        elements,
        slots: None,
        elements_per_packet: None,
        frames_sent: None,
        capacity_warning: None,
        event_counts: BTreeMap::new(),
        events: Vec::new(),
    }
}

fn fill_events(report: &mut AggregateReport, events: &[ElementEvent]) {
    for kind in ["RoundingLoss", "Overwrite", "HeadroomOverflow"] {
        report.event_counts.insert(kind, 0);
    }
    for e in events {
        *report.event_counts.entry(event_kind(&e.event)).or_default() += 1;
        if is_severe(&e.event) {
            report.events.push(EventLine { element: e.element, worker: e.worker, kind: event_kind(&e.event) });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryOp {
    Topn,
    GbExtreme,
    GbSum,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long, value_enum)]
    op: QueryOp,
    /// CSV with header `key,value`
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Generate rows: uniform(lo,hi) or lognormal(sigma[,mu])
    #[arg(long)]
    synthetic: Option<String>,
    /// Synthetic row count
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    /// Synthetic group count
    #[arg(long, default_value_t = 16)]
    groups: u64,
    /// Rows kept by topn
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// topn direction: largest or smallest
    #[arg(long, default_value = "largest")]
    direction: String,
    /// gb-extreme: max or min
    #[arg(long, default_value = "max")]
    extreme: String,
    /// Run element-parallel work on one thread
    #[arg(long)]
    sequential: bool,
    /// Write the pruning report (JSON) here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize, Default)]
struct QueryReport {
    op: &'static str,
    rows_in: usize,
    rows_forwarded: Option<usize>,
    rows_dropped: Option<usize>,
    drop_fraction: Option<f64>,
    malformed_rows: usize,
    non_finite_rows: usize,
    skipped_lines: Vec<u64>,
    rounding_events: Option<usize>,
    overflowed_groups: Option<usize>,
}

#[derive(Serialize)]
struct QueryLine {
    key: String,
    value: Option<String>,
    bits: Option<String>,
    status: &'static str,
}

#[derive(Serialize)]
struct QueryOutput<'a> {
    result: &'a [QueryLine],
    report: &'a QueryReport,
}

pub fn query(common: &CommonArgs, args: &QueryArgs) -> Result<u8> {
    let mut rc = RunConfig::resolve(common, OutputFormat::Csv)?;
    let fmt = rc.fpisa.format;
    let table = match (&args.input, &args.synthetic) {
        (Some(path), _) => {
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_rows(file, fmt).with_context(|| format!("reading {}", path.display()))?
        }
        (None, Some(spec)) => {
            let dist: Distribution = spec.parse().map_err(|e: String| anyhow!(e))?;
            let rows = synthetic::rows(dist, args.rows, args.groups, rc.seed, fmt);
            let n_labels = rows.iter().map(|r| r.key + 1).max().unwrap_or(0);
            RowTable { rows, labels: (0..n_labels).map(|k| k.to_string()).collect(), ..Default::default() }
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let label = |k: u64| table.label(k).to_string();
    let line = |k: u64, w: u32| QueryLine {
        key: label(k),
        value: Some(value_text(w, fmt)),
        bits: Some(hex(w, fmt)),
        status: "ok",
    };
    let mut report = QueryReport {
        rows_in: table.rows.len(),
        malformed_rows: table.malformed,
        non_finite_rows: table.non_finite,
        skipped_lines: table.skipped_lines.clone(),
        ..Default::default()
    };
    let mut strict_failure = false;
    let lines: Vec<QueryLine> = match args.op {
        QueryOp::Topn => {
            report.op = "topn";
            let dir: Direction = args.direction.parse().map_err(|e: String| anyhow!(e))?;
            let r = topn(&table.rows, args.n, dir, fmt)?;
            prune_counts(&mut report, r.rows_forwarded, r.rows_dropped, r.drop_fraction());
            r.result.iter().map(|row| line(row.key, row.value)).collect()
        }
        QueryOp::GbExtreme => {
            report.op = "gb-extreme";
            let which: Extreme = args.extreme.parse().map_err(|e: String| anyhow!(e))?;
            let r = groupby_having_extreme(&table.rows, which, fmt)?;
            prune_counts(&mut report, r.rows_forwarded, r.rows_dropped, r.drop_fraction());
            r.result.iter().map(|(&k, &w)| line(k, w)).collect()
        }
        QueryOp::GbSum => {
            report.op = "gb-sum";
            // accuracy requirement: events always fail this query
            rc.strict = true;
            if rc.fpisa.variant != Variant::Exact {
                return Err(QueryError::NeedsExact.into());
            }
            let s = groupby_sum(&table.rows, &rc.fpisa, exec_for(args.sequential))?;
            report.rounding_events = Some(s.events.len());
            report.overflowed_groups = Some(s.overflowed().count());
            strict_failure = s.overflowed().next().is_some();
            s.groups
                .iter()
                .map(|(&k, r)| match *r {
                    GroupResult::Sum { value } => line(k, value),
                    GroupResult::HeadroomOverflow { .. } => {
                        QueryLine { key: label(k), value: None, bits: None, status: "HeadroomOverflow" }
                    }
                })
                .collect()
        }
    };

    let text = match rc.output_format {
        OutputFormat::Json => json(&QueryOutput { result: &lines, report: &report }),
        OutputFormat::Csv => {
            let mut s = String::from("key,value,bits,status\n");
            for l in &lines {
                writeln!(
                    s,
                    "{},{},{},{}",
                    l.key,
                    l.value.as_deref().unwrap_or(""),
                    l.bits.as_deref().unwrap_or(""),
                    l.status
                )?;
            }
            s
        }
    };
    emit(rc.output.as_deref(), &text)?;
    if let Some(path) = &args.report {
        std::fs::write(path, json(&report)).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!(
        "rows_in={} rows_forwarded={} rows_dropped={} drop_fraction={} malformed_rows={} non_finite_rows={}",
        report.rows_in,
        report.rows_forwarded.map_or("-".into(), |v| v.to_string()),
        report.rows_dropped.map_or("-".into(), |v| v.to_string()),
        report.drop_fraction.map_or("-".into(), |v| v.to_string()),
        report.malformed_rows,
        report.non_finite_rows
    );
    Ok(if rc.strict && strict_failure { EXIT_STRICT } else { 0 })
}

fn prune_counts(report: &mut QueryReport, forwarded: usize, dropped: usize, fraction: f64) {
    report.rows_forwarded = Some(forwarded);
    report.rows_dropped = Some(dropped);
    report.drop_fraction = Some(fraction);
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Element-wise max/min magnitude ratio histogram
    #[arg(long, conflicts_with = "error", required_unless_present = "error")]
    ratio: bool,
    /// Aggregation error histogram against the exact sum
    #[arg(long)]
    error: bool,
    #[command(flatten)]
    input: VectorInput,
}

pub fn analyze(common: &CommonArgs, args: &AnalyzeArgs) -> Result<u8> {
    let rc = RunConfig::resolve(common, OutputFormat::Csv)?;
    let vectors = args.input.load(&rc)?;
    let exec = exec_for(args.input.sequential);
    let (text, severe) = if args.ratio {
        let h = ratio_distribution(&vectors, rc.fpisa.format, exec)?;
        let text = match rc.output_format {
            OutputFormat::Json => h.to_json() + "\n",
            OutputFormat::Csv => h.to_csv(),
        };
        (text, false)
    } else {
        let r = error_distribution(&vectors, &rc.fpisa, exec).map_err(|e| match e {
            AnalysisError::Aggregation(AggregationError::NonFinite { worker, element, source }) => {
                anyhow!("worker {worker} element {element}: {source}")
            }
            other => other.into(),
        })?;
        let h = r.histogram;
        let text = match rc.output_format {
            OutputFormat::Json => h.to_json() + "\n",
            OutputFormat::Csv => h.to_csv(),
        };
        (text, h.classes.overwrite + h.classes.headroom_overflow > 0)
    };
    emit(rc.output.as_deref(), &text)?;
    Ok(if rc.strict && severe { EXIT_STRICT } else { 0 })
}

