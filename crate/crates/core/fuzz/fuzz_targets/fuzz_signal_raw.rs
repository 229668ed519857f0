#![no_main]

use anacomp::harness::{format_signal_raw, parse_signal_raw};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Parsing must never panic; accepted signals must round-trip bit-exactly.
    if let Ok(x) = parse_signal_raw(data) {
        assert_eq!(format_signal_raw(&x), data);
    }
});
