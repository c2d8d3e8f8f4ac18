#![no_main]

use libfuzzer_sys::fuzz_target;
use poisoncert::attacks::AttackTranscript;
use poisoncert::core::{Dataset, Example};

fuzz_target!(|data: &[u8]| {
    if let Ok(transcript) = serde_json::from_slice::<AttackTranscript>(data) {
        let items: Vec<Example> = (0..6)
            .map(|i| Example::new(vec![i as f64], i % 2).unwrap())
            .collect();
        let dataset = Dataset::new(items).unwrap();
        // replay may fail, but must never panic
        let _ = transcript.apply(&dataset);
    }
});
