#![no_main]

use libfuzzer_sys::fuzz_target;
use neuromesh::wire::{decode_frame, Reassembler};

// Feed arbitrary decoded frames into chunk reassembly in arbitrary order;
// insertion and finish must never panic.
fuzz_target!(|data: &[u8]| {
    let mut reassembler = Reassembler::new();
    for (i, piece) in data.split(|&b| b == 0xA5).enumerate() {
        if let Ok(frame) = decode_frame(piece) {
            let _ = reassembler.insert(i, &frame);
        }
    }
    let _ = reassembler.finish();
});
