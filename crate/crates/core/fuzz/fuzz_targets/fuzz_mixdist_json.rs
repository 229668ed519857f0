#![no_main]

use anacomp::mixdist::MixedDistribution;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Parsing must never panic; accepted inputs must round-trip.
    if let Ok(dist) = MixedDistribution::from_json(text) {
        let again = MixedDistribution::from_json(&dist.to_json())
            .expect("serialized distribution must parse back");
        assert_eq!(again.atoms.len(), dist.atoms.len());
        assert_eq!(again.gaussians.len(), dist.gaussians.len());
    }
});
