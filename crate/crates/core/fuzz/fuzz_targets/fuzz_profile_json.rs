#![no_main]

use anacomp::construction::parse_profile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Parsing + validation must never panic; any profile that survives the
    // same gating used by `load_profile` must support its accessors.
    if let Ok(profile) = parse_profile(text) {
        let _ = profile.reserved_set();
    }
});
