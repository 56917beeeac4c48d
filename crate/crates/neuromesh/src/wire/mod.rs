//! Binary wire protocol for inter-node messages.
//!
//! Every datagram on the network is one frame, at most 250 bytes (the payload
//! cap of the target radio transport):
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x4E 0x43
//! 2       1     version, currently 0x01
//! 3       1     msg_type
//! 4       1     flags (bit 0: last chunk)
//! 5       4     inference_id, u32 LE
//! 9       1     layer   (sender or target; 0xFF for coordinators)
//! 10      1     neuron  (sender or target; coordinator index for 0xFF)
//! 11      2     seq, u16 LE (chunk index, or workload index)
//! 13      2     payload_len, u16 LE (<= 224; multiple of 4 for float payloads)
//! 15      n     payload
//! 15+n    4     CRC32 (IEEE) over bytes 0..15+n, u32 LE
//! ```
//!
//! Total length is therefore always `19 + payload_len`. All floats on the
//! wire are 32-bit little-endian. Frames carry no destination addressing;
//! broadcast routing is the transport's concern.
//!
//! [`decode_frame`] is total: any byte string yields either a frame or a
//! typed error, never a panic.

mod bundle;
mod chunk;
mod crc;
mod frame;

pub use bundle::{
    encode_bundle_blob, read_bundle_blob, read_bundle_manifest, read_bundle_params, read_neuron,
    write_bundle, BundleError, BundleManifest, NeuronParams,
};
pub use chunk::{chunk_weight_load, reassemble, ReassembleError, Reassembler};
pub use crc::crc32;
pub use frame::{
    decode_frame, encode_frame, CoordinatorRole, DecodeError, EncodeError, Frame, Message, MsgType,
    COORDINATOR_LAYER, FLAG_LAST_CHUNK, FRAME_MAGIC, FRAME_OVERHEAD, HEADER_LEN, MAX_FRAME_LEN,
    MAX_PAYLOAD_LEN, WIRE_VERSION,
};
