#![no_main]

use libfuzzer_sys::fuzz_target;
use poisoncert::core::{Dataset, Example};
use poisoncert::modelfile::ModelFile;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = ModelFile::from_json(data) {
        let items: Vec<Example> = (0..8)
            .map(|i| Example::new(vec![i as f64, 1.0], i % 2).unwrap())
            .collect();
        let dataset = Dataset::new(items).unwrap();
        if let Ok(loaded) = model.instantiate(&dataset) {
            let _ = loaded.predict(&[1.0, 1.0]);
        }
    }
});
