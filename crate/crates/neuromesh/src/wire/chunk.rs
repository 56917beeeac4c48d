use std::collections::BTreeMap;

use thiserror::Error;

use super::frame::{Frame, Message, MsgType, FLAG_LAST_CHUNK, MAX_PAYLOAD_LEN};

/// Floats per chunk under the payload cap.
const FLOATS_PER_CHUNK: usize = MAX_PAYLOAD_LEN / 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReassembleError {
    #[error("no chunks supplied")]
    Empty,
    #[error("frame {0} is not a weight chunk")]
    WrongType(usize),
    #[error("chunks target different nodes: ({0}, {1}) vs ({2}, {3})")]
    MixedTargets(u8, u8, u8, u8),
    #[error("duplicate chunk seq {0} with different contents")]
    DuplicateMismatch(u16),
    #[error("no chunk carries the last-chunk flag")]
    MissingLastChunk,
    #[error("chunks beyond the last-chunk flag at seq {last}")]
    TrailingChunks { last: u16 },
    #[error("missing chunk seqs {0:?}")]
    Incomplete(Vec<u16>),
    #[error("reassembled payload is empty")]
    NoValues,
    #[error("fan-in {0} exceeds the chunkable maximum of 65535")]
    FanInTooLarge(usize),
}

/// Splits one neuron's `[bias, w0, w1, ...]` vector into WEIGHT_CHUNK frames
/// of at most 224 bytes, seq ascending from 0, the final frame flagged.
pub fn chunk_weight_load(
    layer: u8,
    neuron: u8,
    bias: f32,
    weights: &[f32],
) -> Result<Vec<Frame>, ReassembleError> {
    if weights.len() > u16::MAX as usize {
        return Err(ReassembleError::FanInTooLarge(weights.len()));
    }
    let mut values = Vec::with_capacity(1 + weights.len());
    values.push(bias);
    values.extend_from_slice(weights);
    let n_chunks = values.len().div_ceil(FLOATS_PER_CHUNK);
    let mut frames = Vec::with_capacity(n_chunks);
    for (seq, slice) in values.chunks(FLOATS_PER_CHUNK).enumerate() {
        frames.push(Frame {
            flags: if seq + 1 == n_chunks { FLAG_LAST_CHUNK } else { 0 },
            inference_id: 0,
            layer,
            neuron,
            seq: seq as u16,
            message: Message::WeightChunk {
                values: slice.to_vec(),
            },
        });
    }
    Ok(frames)
}

/// Incremental chunk collector keyed by seq, tolerant of arbitrary arrival
/// order and identical duplicates.
#[derive(Debug, Default, Clone)]
pub struct Reassembler {
    target: Option<(u8, u8)>,
    chunks: BTreeMap<u16, Vec<f32>>,
    last_seq: Option<u16>,
}

impl Reassembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one frame. Index is only used for error reporting.
    pub fn insert(&mut self, index: usize, frame: &Frame) -> Result<(), ReassembleError> {
        if frame.message.msg_type() != MsgType::WeightChunk {
            return Err(ReassembleError::WrongType(index));
        }
        let Message::WeightChunk { values } = &frame.message else {
            return Err(ReassembleError::WrongType(index));
        };
        match self.target {
            None => self.target = Some((frame.layer, frame.neuron)),
            Some((l, n)) if (l, n) != (frame.layer, frame.neuron) => {
                return Err(ReassembleError::MixedTargets(l, n, frame.layer, frame.neuron));
            }
            _ => {}
        }
        if frame.flags & FLAG_LAST_CHUNK != 0 {
            self.last_seq = Some(self.last_seq.map_or(frame.seq, |s| s.max(frame.seq)));
        }
        if let Some(existing) = self.chunks.get(&frame.seq) {
            if existing != values {
                return Err(ReassembleError::DuplicateMismatch(frame.seq));
            }
            return Ok(());
        }
        self.chunks.insert(frame.seq, values.clone());
        Ok(())
    }

    /// True once every seq up to the flagged last chunk has arrived.
    pub fn complete(&self) -> bool {
        match self.last_seq {
            None => false,
            Some(last) => (0..=last).all(|s| self.chunks.contains_key(&s)),
        }
    }

    /// Finishes reassembly, returning `(bias, weights)`.
    pub fn finish(self) -> Result<(f32, Vec<f32>), ReassembleError> {
        let last = self.last_seq.ok_or(ReassembleError::MissingLastChunk)?;
        if let Some((&max_seq, _)) = self.chunks.iter().next_back() {
            if max_seq > last {
                return Err(ReassembleError::TrailingChunks { last });
            }
        }
        let missing: Vec<u16> = (0..=last)
            .filter(|s| !self.chunks.contains_key(s))
            .collect();
        if !missing.is_empty() {
            return Err(ReassembleError::Incomplete(missing));
        }
        let mut values = Vec::new();
        for (_, chunk) in self.chunks {
            values.extend(chunk);
        }
        if values.is_empty() {
            return Err(ReassembleError::NoValues);
        }
        let bias = values[0];
        Ok((bias, values[1..].to_vec()))
    }
}

/// One-shot reassembly of a complete chunk set.
pub fn reassemble(frames: &[Frame]) -> Result<(f32, Vec<f32>), ReassembleError> {
    if frames.is_empty() {
        return Err(ReassembleError::Empty);
    }
    let mut r = Reassembler::new();
    for (i, f) in frames.iter().enumerate() {
        r.insert(i, f)?;
    }
    r.finish()
}
