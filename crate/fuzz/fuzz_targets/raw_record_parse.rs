#![no_main]

use libfuzzer_sys::fuzz_target;
use nucsense::dsp::RawRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = RawRecord::from_bytes(data) {
        // A successfully parsed container must re-encode and re-parse to the
        // same structure.
        let bytes = record.to_bytes().expect("re-encode parsed record");
        let again = RawRecord::from_bytes(&bytes).expect("re-parse encoded record");
        assert_eq!(again.windows.len(), record.windows.len());
        assert_eq!(again.samples_per_window(), record.samples_per_window());
    }
});
