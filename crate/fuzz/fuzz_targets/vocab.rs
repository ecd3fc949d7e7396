#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_core::views::FeatureVocabulary;
use mvae_model::vocab::Vocab;

fuzz_target!(|data: &[u8]| {
    let Some((&specials, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(v) = Vocab::from_text(text, usize::from(specials % 4)) {
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.get(t), Some(i));
        }
        assert_eq!(Vocab::from_text(&v.to_text(), v.specials()).unwrap().tokens(), v.tokens());
    }
    let _ = FeatureVocabulary::from_entries(text.lines().map(String::from).collect());
});
