//! In-network aggregation: workers stream vectors into switch slots, the
//! switch accumulates each element and returns the sum once every worker
//! has contributed.

pub mod frame;
pub mod input;
pub mod session;

use serde::Serialize;
use thiserror::Error;

use crate::arith::{add, readout, to_fpisa, AddEvent, ArithError, FpisaConfig, FpisaValue};
use crate::exec::Exec;
use crate::pipeline::PipelineError;

pub use frame::{ErrorReason, Frame, FrameError, FrameKind};
pub use session::{open_session, Session, SessionConfig, SlotEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregationError {
    #[error("session needs at least one worker, slot and element (got {n_workers}, {n_slots}, {elements_per_packet})")]
    EmptySession { n_workers: usize, n_slots: usize, elements_per_packet: usize },
    #[error("worker count or packet size exceeds the 16-bit frame fields")]
    TooLarge,
    #[error("no worker vectors")]
    NoWorkers,
    #[error("worker {worker} has {len} elements, expected {expected}")]
    LengthMismatch { worker: usize, len: usize, expected: usize },
    #[error("worker {worker} element {element}: {source}")]
    NonFinite { worker: usize, element: usize, source: ArithError },
    #[error("switch rejected a frame for slot {slot}: {reason:?}")]
    Rejected { slot: u32, reason: Option<ErrorReason> },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// More workers than the mantissa register can absorb without overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CapacityWarning {
    pub n_workers: usize,
    pub capacity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ElementEvent {
    pub element: usize,
    pub worker: usize,
    pub event: AddEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub result: Vec<u32>,
    /// Ordered by element, then worker.
    pub events: Vec<ElementEvent>,
}

fn check_lengths(vectors: &[Vec<u32>]) -> Result<usize, AggregationError> {
    let expected = vectors.first().ok_or(AggregationError::NoWorkers)?.len();
    if let Some((worker, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != expected) {
        return Err(AggregationError::LengthMismatch { worker, len: v.len(), expected });
    }
    Ok(expected)
}

/// Folds worker values into a zero state in worker-index order, element by
/// element, and reads each accumulator out.
pub fn aggregate_vectors(vectors: &[Vec<u32>], cfg: &FpisaConfig, exec: Exec) -> Result<Aggregate, AggregationError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let len = check_lengths(vectors)?;
    let rounding = cfg.default_rounding();
    let per_element = exec.map_range(len, |e| {
        let mut state = FpisaValue::ZERO;
        let mut events = Vec::new();
        for (w, v) in vectors.iter().enumerate() {
            let incoming = to_fpisa(v[e], cfg)
                .map_err(|source| AggregationError::NonFinite { worker: w, element: e, source })?;
            let o = add(state, incoming, cfg);
            if !o.event.is_none() {
                events.push(ElementEvent { element: e, worker: w, event: o.event });
            }
            state = o.state;
        }
        let word = readout(&state, cfg, rounding).expect("validated config").bits;
        Ok::<_, AggregationError>((word, events))
    });
    let mut out = Aggregate { result: Vec::with_capacity(len), events: Vec::new() };
    for r in per_element {
        let (word, events) = r?;
        out.result.push(word);
        out.events.extend(events);
    }
    Ok(out)
}

/// Outcome of driving a session with whole vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolRun {
    pub result: Vec<u32>,
    pub events: Vec<ElementEvent>,
    pub frames_sent: usize,
    pub results_received: usize,
    pub capacity_warning: Option<CapacityWarning>,
}

/// Streams `vectors` through a fresh session. Chunk `c` of
/// `elements_per_packet` elements uses slot `c % n_slots`; the last chunk
/// is zero-padded. `arrival(c)` gives the order workers' frames for chunk
/// `c` reach the switch.
pub fn run_protocol_with_order<F>(
    vectors: &[Vec<u32>],
    config: SessionConfig,
    mut arrival: F,
) -> Result<ProtocolRun, AggregationError>
where
    F: FnMut(usize) -> Vec<usize>,
{
    let len = check_lengths(vectors)?;
    if vectors.len() != config.n_workers {
        return Err(AggregationError::LengthMismatch { worker: vectors.len(), len: vectors.len(), expected: config.n_workers });
    }
    for (w, v) in vectors.iter().enumerate() {
        for (e, &word) in v.iter().enumerate() {
            to_fpisa(word, &config.fpisa).map_err(|source| AggregationError::NonFinite { worker: w, element: e, source })?;
        }
    }
    let fmt = config.fpisa.format;
    let e_count = config.elements_per_packet;
    let n_slots = config.n_slots;
    let mut session = open_session(config)?;
    let mut run = ProtocolRun {
        result: vec![0; len],
        events: Vec::new(),
        frames_sent: 0,
        results_received: 0,
        capacity_warning: session.capacity_warning(),
    };
    let chunks = len.div_ceil(e_count);
    for c in 0..chunks {
        let slot = (c % n_slots) as u32;
        let start = c * e_count;
        let end = (start + e_count).min(len);
        let events_before = session.events().len();
        for w in arrival(c) {
            let mut words = vectors[w][start..end].to_vec();
            words.resize(e_count, 0);
            let frame = Frame::contribute(slot, w as u16, session.generation(slot as usize), words);
            run.frames_sent += 1;
            let resp = Frame::decode(&session.ingest(&frame.encode(fmt)), fmt).expect("switch emits valid frames");
            match resp.kind {
                FrameKind::Ack => {}
                FrameKind::Result => {
                    run.results_received += 1;
                    run.result[start..end].copy_from_slice(&resp.words[..end - start]);
                }
                _ => return Err(AggregationError::Rejected { slot, reason: resp.reason() }),
            }
        }
        run.events.extend(session.events()[events_before..].iter().filter(|ev| start + ev.element < end).map(|ev| {
            ElementEvent { element: start + ev.element, worker: ev.worker as usize, event: ev.event }
        }));
    }
    run.events.sort_by_key(|ev| ev.element);
    Ok(run)
}

/// [`run_protocol_with_order`] with frames arriving in worker order.
pub fn run_protocol(vectors: &[Vec<u32>], config: SessionConfig) -> Result<ProtocolRun, AggregationError> {
    let n = vectors.len();
    run_protocol_with_order(vectors, config, |_| (0..n).collect())
}
