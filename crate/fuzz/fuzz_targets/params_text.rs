#![no_main]

use libfuzzer_sys::fuzz_target;
use neuromesh::model_io::{parse_params, render_params};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((spec, params)) = parse_params(text) {
            let rendered = render_params(&spec, &params).expect("parsed params render");
            let (spec2, params2) = parse_params(&rendered).expect("rendered params parse");
            assert_eq!(spec, spec2);
            assert_eq!(params, params2);
        }
    }
});
