#![no_main]

use anacomp::codec::sc_decode;
use anacomp::construction::{rid_tree, select_reserved};
use anacomp::mixdist::{PrunePolicy, SourceModel};
use libfuzzer_sys::fuzz_target;

// The decoder must tolerate arbitrary finite measurement vectors without
// panicking: adversarial inputs may only yield errors or fallback decodes.
fuzz_target!(|data: &[u8]| {
    const N: usize = 16;
    let mut z = Vec::with_capacity(N / 2);
    for chunk in data.chunks_exact(8).take(N / 2) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return;
        }
        z.push(v);
    }
    if z.len() != N / 2 {
        return;
    }

    let source = SourceModel::bernoulli_gaussian(0.5, 1.0);
    let d = rid_tree(source.distribution.rid(), 4);
    let set = select_reserved(&d, &d, N / 2).expect("valid reserved set");
    let policy = PrunePolicy {
        max_atoms: 64,
        max_gaussians: 8,
        ..PrunePolicy::default()
    };
    let _ = sc_decode(&z, &set, &source, &policy);
});
