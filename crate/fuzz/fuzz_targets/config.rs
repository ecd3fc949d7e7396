#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_model::{ModelConfig, TrainConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = serde_json::from_slice::<ModelConfig>(data) {
        if c.validate().is_ok() {
            assert_eq!(c.d_model % c.heads, 0);
        }
    }
    if let Ok(t) = serde_json::from_slice::<TrainConfig>(data) {
        if t.validate().is_ok() {
            assert!(t.lr_at(1).is_finite());
        }
    }
});
