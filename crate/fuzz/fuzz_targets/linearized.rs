#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_core::views::{reparse_linearized, LinearizedGraph};

fuzz_target!(|data: &[u8]| {
    let Some((&flag, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(lin) = LinearizedGraph::from_text(text, flag & 1 == 1) {
        let _ = reparse_linearized(&lin);
    }
});
