use thiserror::Error;

use super::crc::crc32;

pub const FRAME_MAGIC: [u8; 2] = [0x4E, 0x43];
pub const WIRE_VERSION: u8 = 0x01;
/// Fixed header bytes before the payload.
pub const HEADER_LEN: usize = 15;
/// Header plus trailing CRC: every frame is `FRAME_OVERHEAD + payload_len`.
pub const FRAME_OVERHEAD: usize = 19;
/// Hard transport cap on a whole frame.
pub const MAX_FRAME_LEN: usize = 250;
/// Payload cap: a multiple of 4 (56 floats) that leaves header and CRC room
/// inside [`MAX_FRAME_LEN`].
pub const MAX_PAYLOAD_LEN: usize = 224;
/// Value of the `layer` header byte for coordinator-originated frames; the
/// `neuron` byte then carries the coordinator index.
pub const COORDINATOR_LAYER: u8 = 0xFF;
/// Flag bit marking the final chunk of a chunked payload.
pub const FLAG_LAST_CHUNK: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    WeightChunk = 0x01,
    InputVector = 0x02,
    Activation = 0x03,
    Result = 0x04,
    Heartbeat = 0x05,
    FaultInject = 0x06,
    Ack = 0x07,
    Roster = 0x08,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(MsgType::WeightChunk),
            0x02 => Some(MsgType::InputVector),
            0x03 => Some(MsgType::Activation),
            0x04 => Some(MsgType::Result),
            0x05 => Some(MsgType::Heartbeat),
            0x06 => Some(MsgType::FaultInject),
            0x07 => Some(MsgType::Ack),
            0x08 => Some(MsgType::Roster),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::WeightChunk => "weight_chunk",
            MsgType::InputVector => "input_vector",
            MsgType::Activation => "activation",
            MsgType::Result => "result",
            MsgType::Heartbeat => "heartbeat",
            MsgType::FaultInject => "fault_inject",
            MsgType::Ack => "ack",
            MsgType::Roster => "roster",
        }
    }
}

/// Role of a coordinator process. Exactly one primary acts at a time; the
/// standby promotes itself when the primary's heartbeats stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinatorRole {
    Primary,
    Standby,
}

impl CoordinatorRole {
    pub fn name(self) -> &'static str {
        match self {
            CoordinatorRole::Primary => "primary",
            CoordinatorRole::Standby => "standby",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "primary" => Some(CoordinatorRole::Primary),
            "standby" => Some(CoordinatorRole::Standby),
            _ => None,
        }
    }
}

/// Typed payload of a frame.
///
/// All float payloads are 32-bit little-endian. `WeightChunk` carries a slice
/// of `[bias, w0, w1, ...]`; `Heartbeat` identifies its sender redundantly
/// with the header so the payload is self-contained.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    WeightChunk { values: Vec<f32> },
    InputVector { values: Vec<f32> },
    Activation { value: f32 },
    Result { values: Vec<f32> },
    Heartbeat {
        is_coordinator: bool,
        layer: u8,
        neuron: u8,
        counter: u32,
    },
    FaultInject { target_layer: u8, target_neuron: u8 },
    Ack { acked_type: u8, seq: u16 },
    Roster {
        layer_sizes: Vec<u8>,
        nodes: Vec<(u8, u8)>,
    },
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::WeightChunk { .. } => MsgType::WeightChunk,
            Message::InputVector { .. } => MsgType::InputVector,
            Message::Activation { .. } => MsgType::Activation,
            Message::Result { .. } => MsgType::Result,
            Message::Heartbeat { .. } => MsgType::Heartbeat,
            Message::FaultInject { .. } => MsgType::FaultInject,
            Message::Ack { .. } => MsgType::Ack,
            Message::Roster { .. } => MsgType::Roster,
        }
    }

    fn payload(&self) -> Result<Vec<u8>, EncodeError> {
        let mut out = Vec::new();
        match self {
            Message::WeightChunk { values }
            | Message::InputVector { values }
            | Message::Result { values } => {
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Message::Activation { value } => out.extend_from_slice(&value.to_le_bytes()),
            Message::Heartbeat {
                is_coordinator,
                layer,
                neuron,
                counter,
            } => {
                out.push(*is_coordinator as u8);
                out.push(*layer);
                out.push(*neuron);
                out.extend_from_slice(&counter.to_le_bytes());
            }
            Message::FaultInject {
                target_layer,
                target_neuron,
            } => {
                out.push(*target_layer);
                out.push(*target_neuron);
            }
            Message::Ack { acked_type, seq } => {
                out.push(*acked_type);
                out.extend_from_slice(&seq.to_le_bytes());
            }
            Message::Roster { layer_sizes, nodes } => {
                if layer_sizes.len() > u8::MAX as usize {
                    return Err(EncodeError::RosterTooLarge);
                }
                out.push(layer_sizes.len() as u8);
                out.extend_from_slice(layer_sizes);
                if nodes.len() > u16::MAX as usize {
                    return Err(EncodeError::RosterTooLarge);
                }
                out.extend_from_slice(&(nodes.len() as u16).to_le_bytes());
                for (l, n) in nodes {
                    out.push(*l);
                    out.push(*n);
                }
            }
        }
        Ok(out)
    }
}

/// A full frame: routing header plus typed payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub flags: u8,
    pub inference_id: u32,
    /// Sender (or target, for `WeightChunk`/`FaultInject`) layer;
    /// [`COORDINATOR_LAYER`] for coordinators.
    pub layer: u8,
    /// Sender (or target) neuron index, or the coordinator index.
    pub neuron: u8,
    /// Chunk index for chunked payloads; workload index for inference frames.
    pub seq: u16,
    pub message: Message,
}

impl Frame {
    /// Plain data frame with zeroed flags/seq.
    pub fn new(inference_id: u32, layer: u8, neuron: u8, message: Message) -> Self {
        Self {
            flags: 0,
            inference_id,
            layer,
            neuron,
            seq: 0,
            message,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("payload of {len} bytes exceeds frame cap of {MAX_PAYLOAD_LEN}")]
    PayloadTooLarge { len: usize },
    #[error("roster does not fit in one frame")]
    RosterTooLarge,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("frame length {actual} does not match expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("bad magic {0:02X?}")]
    BadMagic([u8; 2]),
    #[error("unknown version {0:#04X}")]
    UnknownVersion(u8),
    #[error("declared payload length {0} exceeds cap {MAX_PAYLOAD_LEN}")]
    OversizePayload(u16),
    #[error("crc mismatch: computed {computed:#010X}, stored {stored:#010X}")]
    CrcMismatch { computed: u32, stored: u32 },
    #[error("unknown msg_type {0:#04X}")]
    UnknownMsgType(u8),
    #[error("{msg_type} payload: {reason}")]
    PayloadSchema {
        msg_type: &'static str,
        reason: String,
    },
}

/// Encodes a frame to its exact byte layout. Fails only when the payload
/// cannot fit under the frame cap (callers chunk instead).
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, EncodeError> {
    let payload = frame.message.payload()?;
    if payload.len() > MAX_PAYLOAD_LEN {
        return Err(EncodeError::PayloadTooLarge { len: payload.len() });
    }
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + payload.len());
    out.extend_from_slice(&FRAME_MAGIC);
    out.push(WIRE_VERSION);
    out.push(frame.message.msg_type() as u8);
    out.push(frame.flags);
    out.extend_from_slice(&frame.inference_id.to_le_bytes());
    out.push(frame.layer);
    out.push(frame.neuron);
    out.extend_from_slice(&frame.seq.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u16).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    debug_assert_eq!(out.len(), FRAME_OVERHEAD + payload.len());
    Ok(out)
}

/// Decodes a frame. Total on arbitrary bytes: never panics, classifying every
/// malformed input as a typed error.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, DecodeError> {
    if bytes.len() < FRAME_OVERHEAD {
        return Err(DecodeError::LengthMismatch {
            expected: FRAME_OVERHEAD,
            actual: bytes.len(),
        });
    }
    if bytes[0..2] != FRAME_MAGIC {
        return Err(DecodeError::BadMagic([bytes[0], bytes[1]]));
    }
    if bytes[2] != WIRE_VERSION {
        return Err(DecodeError::UnknownVersion(bytes[2]));
    }
    let payload_len = u16::from_le_bytes([bytes[13], bytes[14]]);
    if payload_len as usize > MAX_PAYLOAD_LEN {
        return Err(DecodeError::OversizePayload(payload_len));
    }
    let expected = FRAME_OVERHEAD + payload_len as usize;
    if bytes.len() != expected {
        return Err(DecodeError::LengthMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let body_end = HEADER_LEN + payload_len as usize;
    let computed = crc32(&bytes[..body_end]);
    let stored = u32::from_le_bytes([
        bytes[body_end],
        bytes[body_end + 1],
        bytes[body_end + 2],
        bytes[body_end + 3],
    ]);
    if computed != stored {
        return Err(DecodeError::CrcMismatch { computed, stored });
    }
    let msg_type = MsgType::from_byte(bytes[3]).ok_or(DecodeError::UnknownMsgType(bytes[3]))?;
    let flags = bytes[4];
    let inference_id = u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]);
    let layer = bytes[9];
    let neuron = bytes[10];
    let seq = u16::from_le_bytes([bytes[11], bytes[12]]);
    let payload = &bytes[HEADER_LEN..body_end];
    let message = decode_payload(msg_type, payload)?;
    Ok(Frame {
        flags,
        inference_id,
        layer,
        neuron,
        seq,
        message,
    })
}

fn decode_floats(msg_type: MsgType, payload: &[u8]) -> Result<Vec<f32>, DecodeError> {
    if payload.len() % 4 != 0 {
        return Err(DecodeError::PayloadSchema {
            msg_type: msg_type.name(),
            reason: format!("float payload length {} is not a multiple of 4", payload.len()),
        });
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn decode_payload(msg_type: MsgType, payload: &[u8]) -> Result<Message, DecodeError> {
    let schema_err = |reason: String| DecodeError::PayloadSchema {
        msg_type: msg_type.name(),
        reason,
    };
    match msg_type {
        MsgType::WeightChunk => Ok(Message::WeightChunk {
            values: decode_floats(msg_type, payload)?,
        }),
        MsgType::InputVector => Ok(Message::InputVector {
            values: decode_floats(msg_type, payload)?,
        }),
        MsgType::Result => Ok(Message::Result {
            values: decode_floats(msg_type, payload)?,
        }),
        MsgType::Activation => {
            if payload.len() != 4 {
                return Err(schema_err(format!(
                    "expected exactly 4 bytes, got {}",
                    payload.len()
                )));
            }
            Ok(Message::Activation {
                value: f32::from_le_bytes([payload[0], payload[1], payload[2], payload[3]]),
            })
        }
        MsgType::Heartbeat => {
            if payload.len() != 7 {
                return Err(schema_err(format!(
                    "expected 7 bytes, got {}",
                    payload.len()
                )));
            }
            if payload[0] > 1 {
                return Err(schema_err(format!("bad role byte {:#04X}", payload[0])));
            }
            Ok(Message::Heartbeat {
                is_coordinator: payload[0] == 1,
                layer: payload[1],
                neuron: payload[2],
                counter: u32::from_le_bytes([payload[3], payload[4], payload[5], payload[6]]),
            })
        }
        MsgType::FaultInject => {
            if payload.len() != 2 {
                return Err(schema_err(format!(
                    "expected 2 bytes, got {}",
                    payload.len()
                )));
            }
            Ok(Message::FaultInject {
                target_layer: payload[0],
                target_neuron: payload[1],
            })
        }
        MsgType::Ack => {
            if payload.len() != 3 {
                return Err(schema_err(format!(
                    "expected 3 bytes, got {}",
                    payload.len()
                )));
            }
            Ok(Message::Ack {
                acked_type: payload[0],
                seq: u16::from_le_bytes([payload[1], payload[2]]),
            })
        }
        MsgType::Roster => {
            if payload.is_empty() {
                return Err(schema_err("empty roster".into()));
            }
            let n_layers = payload[0] as usize;
            let sizes_end = 1 + n_layers;
            if payload.len() < sizes_end + 2 {
                return Err(schema_err("roster truncated before node count".into()));
            }
            let layer_sizes = payload[1..sizes_end].to_vec();
            let node_count =
                u16::from_le_bytes([payload[sizes_end], payload[sizes_end + 1]]) as usize;
            let nodes_start = sizes_end + 2;
            if payload.len() != nodes_start + node_count * 2 {
                return Err(schema_err(format!(
                    "expected {} node entries",
                    node_count
                )));
            }
            let nodes = payload[nodes_start..]
                .chunks_exact(2)
                .map(|c| (c[0], c[1]))
                .collect();
            Ok(Message::Roster { layer_sizes, nodes })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Worked byte-level example: ACTIVATION value 1.0, inference 7,
    /// layer 1, neuron 3 encodes to exactly these 23 bytes.
    #[test]
    fn activation_frame_reference_bytes() {
        let frame = Frame::new(7, 1, 3, Message::Activation { value: 1.0 });
        let bytes = encode_frame(&frame).unwrap();
        let expected = [
            0x4E, 0x43, 0x01, 0x03, 0x00, 0x07, 0x00, 0x00, 0x00, 0x01, 0x03, 0x00, 0x00, 0x04,
            0x00, 0x00, 0x00, 0x80, 0x3F, 0x39, 0xEB, 0xEE, 0x58,
        ];
        assert_eq!(bytes.len(), 23);
        assert_eq!(bytes.as_slice(), expected);
        assert_eq!(decode_frame(&bytes).unwrap(), frame);
    }

    #[test]
    fn every_variant_round_trips() {
        let frames = vec![
            Frame {
                flags: FLAG_LAST_CHUNK,
                inference_id: 0,
                layer: 2,
                neuron: 9,
                seq: 3,
                message: Message::WeightChunk {
                    values: vec![0.5, -1.25, 3.0],
                },
            },
            Frame::new(12, COORDINATOR_LAYER, 0, Message::InputVector {
                values: vec![0.1, 0.2],
            }),
            Frame::new(1, 1, 0, Message::Activation { value: -4.5 }),
            Frame {
                seq: 41,
                ..Frame::new(9, COORDINATOR_LAYER, 0, Message::Result { values: vec![2.5] })
            },
            Frame::new(0, 1, 4, Message::Heartbeat {
                is_coordinator: false,
                layer: 1,
                neuron: 4,
                counter: 1000,
            }),
            Frame::new(0, COORDINATOR_LAYER, 1, Message::Heartbeat {
                is_coordinator: true,
                layer: COORDINATOR_LAYER,
                neuron: 1,
                counter: 7,
            }),
            Frame::new(0, COORDINATOR_LAYER, 0, Message::FaultInject {
                target_layer: 2,
                target_neuron: 7,
            }),
            Frame::new(0, 1, 2, Message::Ack {
                acked_type: MsgType::WeightChunk as u8,
                seq: 5,
            }),
            Frame::new(0, COORDINATOR_LAYER, 0, Message::Roster {
                layer_sizes: vec![10, 10, 10, 1],
                nodes: vec![(1, 0), (1, 1), (3, 0)],
            }),
        ];
        for frame in frames {
            let bytes = encode_frame(&frame).unwrap();
            assert!(bytes.len() <= MAX_FRAME_LEN);
            let decoded = decode_frame(&bytes).unwrap();
            assert_eq!(decoded, frame, "round trip failed");
        }
    }

    #[test]
    fn oversize_payload_is_an_encode_error() {
        let frame = Frame::new(0, COORDINATOR_LAYER, 0, Message::InputVector {
            values: vec![0.0; 57], // 228 bytes > 224
        });
        assert_eq!(
            encode_frame(&frame),
            Err(EncodeError::PayloadTooLarge { len: 228 })
        );
    }

    #[test]
    fn truncated_frame_is_length_mismatch() {
        let frame = Frame::new(7, 1, 3, Message::Activation { value: 1.0 });
        let bytes = encode_frame(&frame).unwrap();
        assert!(matches!(
            decode_frame(&bytes[..HEADER_LEN]),
            Err(DecodeError::LengthMismatch { .. })
        ));
        assert!(matches!(
            decode_frame(&bytes[..bytes.len() - 1]),
            Err(DecodeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn flipped_payload_bit_is_crc_mismatch() {
        let frame = Frame::new(7, 1, 3, Message::Activation { value: 1.0 });
        let mut bytes = encode_frame(&frame).unwrap();
        bytes[HEADER_LEN] ^= 0x01;
        assert!(matches!(
            decode_frame(&bytes),
            Err(DecodeError::CrcMismatch { .. })
        ));
    }

    #[test]
    fn bad_magic_version_and_type_are_distinct_errors() {
        let frame = Frame::new(7, 1, 3, Message::Activation { value: 1.0 });
        let good = encode_frame(&frame).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = 0x00;
        assert!(matches!(decode_frame(&bad_magic), Err(DecodeError::BadMagic(_))));

        let mut bad_version = good.clone();
        bad_version[2] = 0x02;
        assert!(matches!(
            decode_frame(&bad_version),
            Err(DecodeError::UnknownVersion(0x02))
        ));

        let mut bad_type = good.clone();
        bad_type[3] = 0x7F;
        let body_end = HEADER_LEN + 4;
        let crc = crc32(&bad_type[..body_end]).to_le_bytes();
        bad_type[body_end..].copy_from_slice(&crc);
        assert!(matches!(
            decode_frame(&bad_type),
            Err(DecodeError::UnknownMsgType(0x7F))
        ));
    }

    #[test]
    fn frame_length_law_holds() {
        for n in [0usize, 1, 10, 56] {
            let frame = Frame::new(0, COORDINATOR_LAYER, 0, Message::Result {
                values: vec![1.0; n],
            });
            let bytes = encode_frame(&frame).unwrap();
            assert_eq!(bytes.len(), FRAME_OVERHEAD + 4 * n);
            assert!(bytes.len() <= MAX_FRAME_LEN);
        }
    }
}
