#![no_main]

use libfuzzer_sys::fuzz_target;
use mvae_model::data::parse_records;
use mvae_model::{AlignedExample, Task, ViewOptions, Vocabularies};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(records) = parse_records(text) else {
        return;
    };
    for task in [Task::Amr, Task::Kg] {
        let opts = ViewOptions { task, edge_labels: true };
        let examples: Vec<_> = records
            .iter()
            .filter_map(|r| AlignedExample::from_record(r, opts).ok())
            .collect();
        let vocabs = Vocabularies::build(&examples, 64, 1, true);
        for ex in &examples {
            let inst = vocabs.instance(ex).expect("training examples index cleanly");
            assert_eq!(inst.features.len(), inst.nodes.len() * inst.nodes.len());
        }
    }
});
