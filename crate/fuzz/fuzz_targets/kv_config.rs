#![no_main]

use libfuzzer_sys::fuzz_target;
use neuromesh::config::KvMap;
use neuromesh::experiments::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(kv) = KvMap::parse(text) {
            let again = KvMap::parse(&kv.render()).expect("rendered kv parses");
            assert_eq!(again, kv);
            // Applying arbitrary parsed config must never panic.
            let mut config = ExperimentConfig::default();
            let _ = config.apply_kv(&kv);
        }
    }
});
