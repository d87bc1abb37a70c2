#![no_main]

use clap::Parser;
use libfuzzer_sys::fuzz_target;
use mzgames_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let args = std::iter::once("mzgames").chain(s.split_whitespace());
        if let Ok(config) = RunConfig::try_parse_from(args) {
            let _ = config.validate();
        }
    }
});
