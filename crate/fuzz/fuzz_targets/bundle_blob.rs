#![no_main]

use libfuzzer_sys::fuzz_target;
use neuromesh::wire::{encode_bundle_blob, read_bundle_blob};

fuzz_target!(|data: &[u8]| {
    if let Ok(neuron) = read_bundle_blob(data) {
        let bytes = encode_bundle_blob(&neuron).expect("parsed blob re-encodes");
        assert_eq!(bytes.as_slice(), data);
    }
});
