#![no_main]

use libfuzzer_sys::fuzz_target;
use poisoncert::data::{dataset_from_idx, parse_idx_images, parse_idx_labels, PixelScale};

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data) {
        // pair the parsed images with a label file claiming the same count
        let mut labels = Vec::with_capacity(8 + images.count);
        labels.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        labels.extend_from_slice(&(images.count.min(u32::MAX as usize) as u32).to_be_bytes());
        labels.resize(8 + images.count, 3);
        if let Ok(parsed_labels) = parse_idx_labels(&labels) {
            let _ = dataset_from_idx(&images, &parsed_labels, 16, PixelScale::Unit);
            let _ = dataset_from_idx(&images, &parsed_labels, 16, PixelScale::Raw);
        }
    }
});
