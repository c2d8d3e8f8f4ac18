#![no_main]

use libfuzzer_sys::fuzz_target;
use poisoncert::data::{dataset_to_csv, parse_dataset_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_dataset_csv(data) {
        // anything we accept must round-trip bit-exactly
        let text = dataset_to_csv(&parsed);
        let again = parse_dataset_csv(text.as_bytes()).expect("serializer output must parse");
        assert_eq!(parsed, again);
    }
});
