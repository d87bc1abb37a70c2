#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        // parse errors and invalid chains are fine, panics are not
        let _ = mzgames_cli::ingest::load_game_str(s);
    }
});
