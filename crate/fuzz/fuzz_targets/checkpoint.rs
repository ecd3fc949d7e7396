#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_nn::{read_checkpoint, write_checkpoint, ParamStore};

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = read_checkpoint::<f32, _>(data) {
        let mut bytes = Vec::new();
        write_checkpoint(&store, &mut bytes).expect("in-memory write");
        let again: ParamStore<f32> = read_checkpoint(&bytes[..]).expect("written checkpoint reads");
        assert_eq!(store.len(), again.len());
    }
});
