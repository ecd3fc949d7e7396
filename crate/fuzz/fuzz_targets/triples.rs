#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_core::{parse_triples, to_triples};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = parse_triples(text) {
        let again = parse_triples(&to_triples(&g)).expect("serialized triples parse");
        assert_eq!(g.edge_count(), again.edge_count());
    }
});
