#![no_main]

use anacomp::harness::{format_signal_text, parse_signal_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Parsing must never panic; accepted signals must round-trip exactly.
    if let Ok(x) = parse_signal_text(text) {
        let again = parse_signal_text(&format_signal_text(&x))
            .expect("formatted signal must parse back");
        assert_eq!(again, x);
    }
});
