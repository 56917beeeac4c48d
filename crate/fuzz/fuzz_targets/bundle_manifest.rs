#![no_main]

use libfuzzer_sys::fuzz_target;
use neuromesh::wire::BundleManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(manifest) = BundleManifest::parse(text) {
            // A parsed manifest must round-trip through its renderer.
            let again = BundleManifest::parse(&manifest.render()).expect("rendered manifest parses");
            assert_eq!(again, manifest);
        }
    }
});
