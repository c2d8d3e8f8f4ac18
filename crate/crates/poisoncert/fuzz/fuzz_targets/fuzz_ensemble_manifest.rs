#![no_main]

use libfuzzer_sys::fuzz_target;
use poisoncert::core::{Dataset, Example};
use poisoncert::robust::{EnsembleManifest, EnsembleModel};

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = serde_json::from_slice::<EnsembleManifest>(data) {
        // instantiating against a small fixed dataset must never panic
        let items: Vec<Example> = (0..8)
            .map(|i| Example::new(vec![i as f64, (i % 3) as f64], i % 2).unwrap())
            .collect();
        let dataset = Dataset::new(items).unwrap();
        if let Ok(model) = EnsembleModel::from_manifest(&manifest, &dataset) {
            let _ = model.predict(&[0.5, 0.5]);
            for class in poisoncert::core::AdversaryClass::ALL {
                let _ = model.certify(&[0.5, 0.5], class);
            }
        }
    }
});
