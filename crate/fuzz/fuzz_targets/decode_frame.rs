#![no_main]

use libfuzzer_sys::fuzz_target;
use neuromesh::wire::{decode_frame, encode_frame};

// The frame decoder must be total: any byte string yields a frame or a typed
// error, never a panic. Valid frames must re-encode to the same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_frame(data) {
        let bytes = encode_frame(&frame).expect("decoded frame re-encodes");
        assert_eq!(bytes.as_slice(), data, "re-encode must reproduce the input");
    }
});
