#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(x) = mzgames_cli::ingest::parse_number("x", s) {
            assert!(x.is_finite());
        }
    }
});
