use serde::Serialize;

use super::frame::{ErrorReason, Frame, FrameKind};
use super::{AggregationError, CapacityWarning};
use crate::arith::{add, overflow_capacity, to_fpisa, AddEvent, FpisaConfig};
use crate::formats::decode;
use crate::pipeline::builtin::FpisaPipeline;
use crate::pipeline::AluProfile;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub n_workers: usize,
    pub n_slots: usize,
    pub elements_per_packet: usize,
    pub fpisa: FpisaConfig,
    pub profile: AluProfile,
}

/// An event observed while adding one element of a contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotEvent {
    pub slot: u32,
    pub generation: u16,
    pub element: usize,
    pub worker: u16,
    pub event: AddEvent,
}

#[derive(Debug, Clone)]
struct SlotState {
    generation: u16,
    contributed: Vec<bool>,
    count: usize,
    overflow: bool,
}

/// Switch-side aggregation state: the pipeline's register arrays hold
/// `n_slots × elements_per_packet` accumulators, slot `s` element `e` at
/// index `s * E + e`.
#[derive(Debug)]
pub struct Session {
    config: SessionConfig,
    pipeline: FpisaPipeline,
    slots: Vec<SlotState>,
    events: Vec<SlotEvent>,
    warning: Option<CapacityWarning>,
}

pub fn open_session(config: SessionConfig) -> Result<Session, AggregationError> {
    if config.n_workers == 0 || config.n_slots == 0 || config.elements_per_packet == 0 {
        return Err(AggregationError::EmptySession {
            n_workers: config.n_workers,
            n_slots: config.n_slots,
            elements_per_packet: config.elements_per_packet,
        });
    }
    if config.n_workers > u16::MAX as usize + 1 || config.elements_per_packet > u16::MAX as usize {
        return Err(AggregationError::TooLarge);
    }
    let capacity = overflow_capacity(&config.fpisa);
    let warning = (config.n_workers as u64 > capacity)
        .then_some(CapacityWarning { n_workers: config.n_workers, capacity });
    let cells = config.n_slots * config.elements_per_packet;
    let pipeline = FpisaPipeline::new(config.fpisa, cells, config.profile.clone())?;
    let slot = SlotState { generation: 0, contributed: vec![false; config.n_workers], count: 0, overflow: false };
    Ok(Session { slots: vec![slot; config.n_slots], pipeline, events: Vec::new(), warning, config })
}

impl Session {
    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn capacity_warning(&self) -> Option<CapacityWarning> {
        self.warning
    }

    pub fn events(&self) -> &[SlotEvent] {
        &self.events
    }

    pub fn generation(&self, slot: usize) -> u16 {
        self.slots[slot].generation
    }

    pub fn overflowed(&self, slot: usize) -> bool {
        self.slots[slot].overflow
    }

    pub fn pipeline(&self) -> &FpisaPipeline {
        &self.pipeline
    }

    /// Handles one frame and returns the response frame.
    pub fn ingest(&mut self, bytes: &[u8]) -> Vec<u8> {
        let fmt = self.config.fpisa.format;
        self.respond(bytes).encode(fmt)
    }

    /// Like [`ingest`](Self::ingest) on decoded frames.
    pub fn respond(&mut self, bytes: &[u8]) -> Frame {
        let fmt = self.config.fpisa.format;
        let frame = match Frame::decode(bytes, fmt) {
            Ok(f) => f,
            Err(_) => return Frame::error(0, 0, 0, ErrorReason::Malformed),
        };
        let Frame { kind, slot, worker, generation, .. } = frame;
        let reject = |reason| Frame::error(slot, worker, generation, reason);
        if kind != FrameKind::Contribute {
            return reject(ErrorReason::UnexpectedKind);
        }
        if slot as usize >= self.config.n_slots {
            return reject(ErrorReason::SlotOutOfRange);
        }
        if worker as usize >= self.config.n_workers {
            return reject(ErrorReason::WorkerOutOfRange);
        }
        if frame.words.len() != self.config.elements_per_packet {
            return reject(ErrorReason::CountMismatch);
        }
        if frame.words.iter().any(|&w| !decode(w, fmt).is_finite()) {
            return reject(ErrorReason::NonFinite);
        }
        let ack = Frame { kind: FrameKind::Ack, slot, worker, generation, words: vec![] };
        let state = &self.slots[slot as usize];
        if generation != state.generation {
            // a replay of the generation that just completed
            if generation == state.generation.wrapping_sub(1) {
                return ack;
            }
            return reject(ErrorReason::GenerationMismatch);
        }
        if state.contributed[worker as usize] {
            return ack;
        }

        let e_count = self.config.elements_per_packet;
        let cfg = self.config.fpisa;
        let base = slot as usize * e_count;
        for (e, &word) in frame.words.iter().enumerate() {
            let observed = self.pipeline.add(base + e, word).expect("validated frame runs through the pipeline");
            let incoming = to_fpisa(word, &cfg).expect("finite word");
            let outcome = add(observed.before, incoming, &cfg);
            debug_assert_eq!(outcome.state, observed.after);
            if outcome.event == AddEvent::HeadroomOverflow {
                self.slots[slot as usize].overflow = true;
            }
            if !outcome.event.is_none() {
                self.events.push(SlotEvent { slot, generation, element: e, worker, event: outcome.event });
            }
        }

        let state = &mut self.slots[slot as usize];
        state.contributed[worker as usize] = true;
        state.count += 1;
        if state.count < self.config.n_workers {
            return ack;
        }
        let words = (0..e_count)
            .map(|e| self.pipeline.read(base + e).expect("read packets always emit"))
            .collect();
        for e in 0..e_count {
            self.pipeline.clear(base + e).expect("slot in range");
        }
        let state = &mut self.slots[slot as usize];
        state.generation = state.generation.wrapping_add(1);
        state.contributed.iter_mut().for_each(|c| *c = false);
        state.count = 0;
        state.overflow = false;
        Frame { kind: FrameKind::Result, slot, worker, generation, words }
    }
}
