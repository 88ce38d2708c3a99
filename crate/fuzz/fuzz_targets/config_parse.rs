#![no_main]

use libfuzzer_sys::fuzz_target;
use nucsense::experiments::ExperimentConfig;
use nucsense_cli::{from_document, SimulateConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(doc) = serde_json::from_str::<serde_json::Value>(text) else {
        return;
    };
    if let Ok(cfg) = from_document::<SimulateConfig>(doc.clone()) {
        let _ = cfg.validate();
    }
    let _ = from_document::<ExperimentConfig>(doc);
});
