#![no_main]

use libfuzzer_sys::fuzz_target;
use neuromesh::datagen::{from_csv, to_csv, Split};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(dataset) = from_csv(text, Split::Test) {
            // Parsed datasets round-trip bitwise through the writer.
            let again = from_csv(&to_csv(&dataset), Split::Test).expect("rendered CSV parses");
            assert_eq!(again, dataset);
        }
    }
});
