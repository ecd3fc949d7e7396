#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_core::load_alignments;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(a) = load_alignments(text) {
        let again = load_alignments(&a.to_text()).expect("written alignment loads");
        assert_eq!(a, again);
    }
});
