#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_core::{is_isomorphic, parse_penman, to_penman};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(g) = parse_penman(text) else {
        return;
    };
    // Anything accepted and serializable must survive a round trip.
    if let Ok(out) = to_penman(&g) {
        let again = parse_penman(&out).expect("serialized graph parses");
        assert!(is_isomorphic(&g, &again));
    }
});
